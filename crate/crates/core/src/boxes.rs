//! Pixel coordinates, per-frame box tracks and box-mask rasterization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A pixel location `(t, x, y)` in a `T×H×W` clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub t: usize,
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub const fn new(t: usize, x: usize, y: usize) -> Self {
        Self { t, x, y }
    }

    /// Linear offset into a `T×H×W` tensor.
    pub fn index(&self, dims: ClipDims) -> usize {
        (self.t * dims.height + self.y) * dims.width + self.x
    }

    pub fn in_bounds(&self, dims: ClipDims) -> bool {
        self.t < dims.frames && self.y < dims.height && self.x < dims.width
    }
}

/// Spatial-temporal extent `(T, H, W)` of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipDims {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl ClipDims {
    pub const fn new(frames: usize, height: usize, width: usize) -> Self {
        Self {
            frames,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn as_vec(&self) -> Vec<usize> {
        vec![self.frames, self.height, self.width]
    }

    /// Reads `(T, H, W)` from the leading three axes of a tensor.
    pub fn of(tensor: &Tensor) -> Result<Self> {
        match tensor.dims() {
            [t, h, w, ..] => Ok(Self::new(*t, *h, *w)),
            [h, w] => Ok(Self::new(1, *h, *w)),
            other => Err(Error::Argument(format!(
                "expected a T×H×W tensor, got dims {other:?}"
            ))),
        }
    }

    pub fn pixels(self) -> impl Iterator<Item = Pixel> {
        (0..self.frames).flat_map(move |t| {
            (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Pixel::new(t, x, y)))
        })
    }
}

/// One frame's box, half-open pixel coordinates `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxEntry {
    pub frame: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoxEntry {
    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    /// Box center in continuous pixel-edge coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x0 + self.x1) as f64 / 2.0,
            (self.y0 + self.y1) as f64 / 2.0,
        )
    }
}

/// A ground-truth box for one instance across the frames where it appears.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxTrack {
    pub instance_id: i64,
    entries: Vec<BoxEntry>,
}

impl BoxTrack {
    /// Entries are sorted by frame; each must be non-empty and frames unique.
    pub fn new(instance_id: i64, mut entries: Vec<BoxEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.frame);
        for e in &entries {
            if e.x0 >= e.x1 || e.y0 >= e.y1 {
                return Err(Error::Range(format!("degenerate box {e:?}")));
            }
        }
        if entries.windows(2).any(|w| w[0].frame == w[1].frame) {
            return Err(Error::Argument(format!(
                "instance {instance_id} has two boxes in one frame"
            )));
        }
        Ok(Self {
            instance_id,
            entries,
        })
    }

    pub fn entries(&self) -> &[BoxEntry] {
        &self.entries
    }

    pub fn in_frame(&self, frame: usize) -> Option<&BoxEntry> {
        self.entries
            .binary_search_by_key(&frame, |e| e.frame)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn check_fits(&self, dims: ClipDims) -> Result<()> {
        for e in &self.entries {
            if e.frame >= dims.frames || e.x1 > dims.width || e.y1 > dims.height {
                return Err(Error::Range(format!(
                    "box {e:?} of instance {} outside clip {dims:?}",
                    self.instance_id
                )));
            }
        }
        Ok(())
    }
}

/// Rasterizes a track to a `T×H×W` mask: 1 inside each frame's box, else 0.
pub fn rasterize_box_mask(track: &BoxTrack, dims: ClipDims) -> Result<Tensor> {
    track.check_fits(dims)?;
    let mut mask = Tensor::zeros(&dims.as_vec());
    let data = mask.data_mut();
    for e in track.entries() {
        for y in e.y0..e.y1 {
            let row = (e.frame * dims.height + y) * dims.width;
            data[row + e.x0..row + e.x1].fill(1.0);
        }
    }
    Ok(mask)
}
