//! Still image → pseudo clip: every frame is an independent
//! resize → crop → rotate of the source image.
//!
//! Coordinates are continuous pixel-edge coordinates: pixel `(i, j)` covers
//! `[j, j+1) × [i, i+1)` and its center sits at `(j + 0.5, i + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::boxes::{BoxEntry, BoxTrack};
use crate::clip::ClipSample;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugSpec {
    /// Inclusive range for the resized short edge, in pixels.
    pub resize_short_edge: [u32; 2],
    /// Inclusive range for the crop's short edge, in pixels.
    pub crop_short_edge: [u32; 2],
    /// Rotation range in degrees.
    pub rotation_deg: [f64; 2],
    pub frames: usize,
}

impl Default for AugSpec {
    fn default() -> Self {
        Self {
            resize_short_edge: [600, 800],
            crop_short_edge: [320, 512],
            rotation_deg: [-15.0, 15.0],
            frames: 3,
        }
    }
}

impl AugSpec {
    pub fn validate(&self) -> Result<()> {
        let [rl, rh] = self.resize_short_edge;
        let [cl, ch] = self.crop_short_edge;
        let [al, ah] = self.rotation_deg;
        if rl == 0 || rl > rh {
            return Err(Error::Spec(format!("bad resize range [{rl}, {rh}]")));
        }
        if cl == 0 || cl > ch {
            return Err(Error::Spec(format!("bad crop range [{cl}, {ch}]")));
        }
        if !(al.is_finite() && ah.is_finite() && al <= ah) {
            return Err(Error::Spec(format!("bad rotation range [{al}, {ah}]")));
        }
        if self.frames == 0 {
            return Err(Error::Spec("a clip needs at least one frame".into()));
        }
        Ok(())
    }
}

/// A box on the still image, half-open pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageBox {
    pub instance_id: i64,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// The geometric part of one frame's augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameTransform {
    pub resized_height: usize,
    pub resized_width: usize,
    pub scale_x: f64,
    pub scale_y: f64,
    pub crop_x: usize,
    pub crop_y: usize,
    pub crop_width: usize,
    pub crop_height: usize,
    /// Rotation in radians around the crop center.
    pub angle: f64,
}

impl FrameTransform {
    /// Draws resize, crop and rotation parameters for an `height × width`
    /// source image.
    pub fn draw(spec: &AugSpec, height: usize, width: usize, rng: &mut RngStream) -> Result<Self> {
        let short = height.min(width) as f64;
        let target = rng.uniform_int(spec.resize_short_edge[0] as u64, spec.resize_short_edge[1] as u64)? as f64;
        let scale = target / short;
        let rh = ((height as f64 * scale).round() as usize).max(1);
        let rw = ((width as f64 * scale).round() as usize).max(1);
        let rshort = rh.min(rw) as u64;
        let [cl, ch] = spec.crop_short_edge;
        if cl as u64 > rshort {
            return Err(Error::Spec(format!(
                "crop short edge {cl} exceeds resized image {rh}×{rw}"
            )));
        }
        let crop_short = rng.uniform_int(cl as u64, (ch as u64).min(rshort))? as usize;
        let (crop_height, crop_width) = if rh <= rw {
            let long = (crop_short as f64 * rw as f64 / rh as f64).round() as usize;
            (crop_short, long.clamp(crop_short, rw))
        } else {
            let long = (crop_short as f64 * rh as f64 / rw as f64).round() as usize;
            (long.clamp(crop_short, rh), crop_short)
        };
        let crop_x = rng.uniform_int(0, (rw - crop_width) as u64)? as usize;
        let crop_y = rng.uniform_int(0, (rh - crop_height) as u64)? as usize;
        let deg = rng.uniform(spec.rotation_deg[0], spec.rotation_deg[1])?;
        Ok(Self {
            resized_height: rh,
            resized_width: rw,
            scale_x: rw as f64 / width as f64,
            scale_y: rh as f64 / height as f64,
            crop_x,
            crop_y,
            crop_width,
            crop_height,
            angle: deg.to_radians(),
        })
    }

    fn center(&self) -> (f64, f64) {
        (self.crop_width as f64 / 2.0, self.crop_height as f64 / 2.0)
    }

    /// Maps a continuous source-image point into the output frame.
    pub fn map_point(&self, x: f64, y: f64) -> (f64, f64) {
        let px = x * self.scale_x - self.crop_x as f64;
        let py = y * self.scale_y - self.crop_y as f64;
        let (cx, cy) = self.center();
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (px - cx, py - cy);
        (cx + c * dx - s * dy, cy + s * dx + c * dy)
    }

    /// Inverse rotation: output-frame point to crop coordinates.
    fn unrotate(&self, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy) = self.center();
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - cx, y - cy);
        (cx + c * dx + s * dy, cy - s * dx + c * dy)
    }

    /// Axis-aligned hull of the transformed box corners, clipped to the
    /// frame and snapped outward to whole pixels. `None` if nothing is left.
    pub fn map_box(&self, b: &ImageBox) -> Option<(usize, usize, usize, usize)> {
        const SNAP: f64 = 1e-9;
        let corners = [
            (b.x0 as f64, b.y0 as f64),
            (b.x1 as f64, b.y0 as f64),
            (b.x0 as f64, b.y1 as f64),
            (b.x1 as f64, b.y1 as f64),
        ]
        .map(|(x, y)| self.map_point(x, y));
        let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| {
            corners.iter().map(pick).fold(init, f)
        };
        let (w, h) = (self.crop_width as f64, self.crop_height as f64);
        let x0 = fold(f64::min, f64::INFINITY, |p| p.0).max(0.0);
        let x1 = fold(f64::max, f64::NEG_INFINITY, |p| p.0).min(w);
        let y0 = fold(f64::min, f64::INFINITY, |p| p.1).max(0.0);
        let y1 = fold(f64::max, f64::NEG_INFINITY, |p| p.1).min(h);
        let (x0, y0) = ((x0 + SNAP).floor() as usize, (y0 + SNAP).floor() as usize);
        let (x1, y1) = ((x1 - SNAP).ceil().max(0.0) as usize, (y1 - SNAP).ceil().max(0.0) as usize);
        (x0 < x1 && y0 < y1).then_some((x0, y0, x1, y1))
    }
}

/// Bilinear sample of an `H×W×C` image at continuous pixel-index
/// coordinates, with border replication.
fn sample_bilinear(image: &Tensor, fx: f64, fy: f64, out: &mut [f64]) {
    let (h, w, c) = (image.dims()[0], image.dims()[1], image.dims()[2]);
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (wx, wy) = (fx - x0 as f64, fy - y0 as f64);
    let d = image.data();
    for (ch, o) in out.iter_mut().enumerate() {
        let at = |y: usize, x: usize| d[(y * w + x) * c + ch];
        let top = at(y0, x0) * (1.0 - wx) + at(y0, x1) * wx;
        let bottom = at(y1, x0) * (1.0 - wx) + at(y1, x1) * wx;
        *o = top * (1.0 - wy) + bottom * wy;
    }
}

/// Renders one frame: the crop window of the resized image, rotated.
pub fn render_frame(image: &Tensor, tf: &FrameTransform) -> Tensor {
    let c = image.dims()[2];
    let (cw, ch) = (tf.crop_width, tf.crop_height);
    let mut crop = Tensor::zeros(&[ch, cw, c]);
    for v in 0..ch {
        for u in 0..cw {
            let rx = (tf.crop_x + u) as f64 + 0.5;
            let ry = (tf.crop_y + v) as f64 + 0.5;
            let o = (v * cw + u) * c;
            sample_bilinear(
                image,
                rx / tf.scale_x - 0.5,
                ry / tf.scale_y - 0.5,
                &mut crop.data_mut()[o..o + c],
            );
        }
    }
    if tf.angle == 0.0 {
        return crop;
    }
    let mut out = Tensor::zeros(&[ch, cw, c]);
    for v in 0..ch {
        for u in 0..cw {
            let (sx, sy) = tf.unrotate(u as f64 + 0.5, v as f64 + 0.5);
            let o = (v * cw + u) * c;
            sample_bilinear(&crop, sx - 0.5, sy - 0.5, &mut out.data_mut()[o..o + c]);
        }
    }
    out
}

/// Builds a `spec.frames`-frame pseudo clip from one `H×W×C` image. Boxes
/// follow the geometry of each frame; boxes that leave a frame entirely are
/// absent from that frame's track.
pub fn augment_image_to_clip(
    image: &Tensor,
    boxes: &[ImageBox],
    spec: &AugSpec,
    rng: &mut RngStream,
) -> Result<ClipSample> {
    spec.validate()?;
    image.expect_rank(3, "image")?;
    let (h, w) = (image.dims()[0], image.dims()[1]);
    for b in boxes {
        if b.x0 >= b.x1 || b.y0 >= b.y1 || b.x1 > w || b.y1 > h {
            return Err(Error::Range(format!("box {b:?} outside {h}×{w} image")));
        }
    }
    let mut frames = Vec::with_capacity(spec.frames);
    let mut entries: Vec<Vec<BoxEntry>> = vec![Vec::new(); boxes.len()];
    for t in 0..spec.frames {
        let tf = FrameTransform::draw(spec, h, w, rng)?;
        frames.push(render_frame(image, &tf));
        for (b, track) in boxes.iter().zip(entries.iter_mut()) {
            if let Some((x0, y0, x1, y1)) = tf.map_box(b) {
                track.push(BoxEntry {
                    frame: t,
                    x0,
                    y0,
                    x1,
                    y1,
                });
            }
        }
    }
    let tracks = boxes
        .iter()
        .zip(entries)
        .map(|(b, e)| BoxTrack::new(b.instance_id, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClipSample {
        frames,
        tracks,
        gt_masks: None,
    })
}
