//! Spatial-temporal pairwise affinity (STPA).
//!
//! Temporal pairs are found by shifting every in-box pixel of frame `t` by
//! the displacement of its instance's box center between `t` and `t + 1`,
//! then pairing it with the shifted pixel and (optionally) that pixel's
//! 4-neighborhood. Each pair is scored by LAB color similarity plus a
//! weighted patch correlation in feature space.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::boxes::{rasterize_box_mask, BoxTrack, ClipDims, Pixel};
use crate::boxlosses::{
    affinity_nll, check_edges, check_lab, lab_similarity, spatial_pair_set, Edge, LossResult,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StpaConfig {
    pub theta: f64,
    pub tau_lab: f64,
    pub tau_corr: f64,
    /// Weight of the patch correlation in the combined affinity.
    pub w_corr: f64,
    /// Patch radius; patches are `(2k + 1)²`.
    pub k: usize,
    /// Temporal partners per pixel: 5 (shifted pixel and its 4-neighborhood)
    /// or 3 (shifted pixel, right, bottom).
    pub temporal_neighbors: usize,
}

impl Default for StpaConfig {
    fn default() -> Self {
        Self {
            theta: 2.0,
            tau_lab: 0.3,
            tau_corr: 0.9,
            w_corr: 0.5,
            k: 1,
            temporal_neighbors: 5,
        }
    }
}

impl StpaConfig {
    /// Combined threshold `τ_lab + w_corr · τ_corr`.
    pub fn threshold(&self) -> f64 {
        self.tau_lab + self.w_corr * self.tau_corr
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Argument(format!("theta must be positive, got {}", self.theta)));
        }
        for (name, v) in [("tau_lab", self.tau_lab), ("tau_corr", self.tau_corr)] {
            if !(-1.0..=1.5).contains(&v) {
                return Err(Error::Argument(format!("{name} = {v} outside [-1, 1.5]")));
            }
        }
        if !(self.w_corr >= 0.0 && self.w_corr.is_finite()) {
            return Err(Error::Argument(format!("w_corr must be non-negative, got {}", self.w_corr)));
        }
        if !matches!(self.temporal_neighbors, 3 | 5) {
            return Err(Error::Argument(format!(
                "temporal_neighbors must be 3 or 5, got {}",
                self.temporal_neighbors
            )));
        }
        Ok(())
    }

    fn neighborhood(&self) -> &'static [(i64, i64)] {
        const FIVE: [(i64, i64); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];
        const THREE: [(i64, i64); 3] = [(0, 0), (1, 0), (0, 1)];
        if self.temporal_neighbors == 3 {
            &THREE
        } else {
            &FIVE
        }
    }
}

/// Rounded box-center displacement of one instance between adjacent frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenterOffset {
    pub instance_id: i64,
    pub from_frame: usize,
    pub to_frame: usize,
    pub dx: i64,
    pub dy: i64,
}

/// Offsets `center(t + 1) − center(t)` for every instance and adjacent frame
/// pair where both boxes exist. Rounds half away from zero.
pub fn center_offsets(boxes: &[BoxTrack]) -> Vec<CenterOffset> {
    let mut out = Vec::new();
    for track in boxes {
        for pair in track.entries().windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b.frame != a.frame + 1 {
                continue;
            }
            let (ax, ay) = a.center();
            let (bx, by) = b.center();
            out.push(CenterOffset {
                instance_id: track.instance_id,
                from_frame: a.frame,
                to_frame: b.frame,
                dx: (bx - ax).round() as i64,
                dy: (by - ay).round() as i64,
            });
        }
    }
    out
}

/// Temporal edges from in-box pixels of `from_frame` to their shifted
/// partners in `to_frame`. Targets outside the frame are dropped and
/// duplicate pairs (from overlapping instances with equal motion) are kept
/// once.
pub fn temporal_pair_set(
    dims: ClipDims,
    boxes: &[BoxTrack],
    offsets: &[CenterOffset],
    cfg: &StpaConfig,
) -> Result<Vec<Edge>> {
    cfg.validate()?;
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for off in offsets {
        let track = boxes
            .iter()
            .find(|b| b.instance_id == off.instance_id)
            .ok_or_else(|| Error::Argument(format!("no track for instance {}", off.instance_id)))?;
        track.check_fits(dims)?;
        let Some(src) = track.in_frame(off.from_frame) else {
            continue;
        };
        if off.to_frame >= dims.frames {
            return Err(Error::Range(format!("offset {off:?} outside clip {dims:?}")));
        }
        for y in src.y0..src.y1 {
            for x in src.x0..src.x1 {
                let a = Pixel::new(off.from_frame, x, y);
                for &(ox, oy) in cfg.neighborhood() {
                    let tx = x as i64 + off.dx + ox;
                    let ty = y as i64 + off.dy + oy;
                    if tx < 0 || ty < 0 || tx >= dims.width as i64 || ty >= dims.height as i64 {
                        continue;
                    }
                    let b = Pixel::new(off.to_frame, tx as usize, ty as usize);
                    if seen.insert((a, b)) {
                        edges.push(Edge::new(a, b));
                    }
                }
            }
        }
    }
    Ok(edges)
}

/// `E_s ∪ E_t` for a single instance: spatial edges touching its boxes plus
/// (when `temporal` is set) its center-shifted temporal edges.
pub fn instance_pair_set(
    dims: ClipDims,
    track: &BoxTrack,
    cfg: &StpaConfig,
    temporal: bool,
) -> Result<Vec<Edge>> {
    let mask = rasterize_box_mask(track, dims)?;
    let mut edges = spatial_pair_set(dims, &mask)?;
    if temporal {
        let tracks = std::slice::from_ref(track);
        edges.extend(temporal_pair_set(dims, tracks, &center_offsets(tracks), cfg)?);
    }
    Ok(edges)
}

fn check_features(feat: &Tensor, dims: ClipDims) -> Result<usize> {
    match feat.dims() {
        [t, h, w, d] if *t == dims.frames && *h == dims.height && *w == dims.width => Ok(*d),
        other => Err(Error::Argument(format!(
            "features must be {}×{}×{}×D, got {other:?}",
            dims.frames, dims.height, dims.width
        ))),
    }
}

fn clamp_shift(v: usize, o: i64, len: usize) -> usize {
    (v as i64 + o).clamp(0, len as i64 - 1) as usize
}

pub(crate) fn patch_corr(feat: &[f64], dims: ClipDims, depth: usize, a: Pixel, b: Pixel, k: usize) -> f64 {
    let k = k as i64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for oy in -k..=k {
        for ox in -k..=k {
            let pa = Pixel::new(
                a.t,
                clamp_shift(a.x, ox, dims.width),
                clamp_shift(a.y, oy, dims.height),
            );
            let pb = Pixel::new(
                b.t,
                clamp_shift(b.x, ox, dims.width),
                clamp_shift(b.y, oy, dims.height),
            );
            let fa = &feat[pa.index(dims) * depth..][..depth];
            let fb = &feat[pb.index(dims) * depth..][..depth];
            let dot: f64 = fa.iter().zip(fb).map(|(u, v)| u * v).sum();
            let na = fa.iter().map(|u| u * u).sum::<f64>().sqrt();
            let nb = fb.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na > 0.0 && nb > 0.0 {
                sum += dot / (na * nb);
            }
            count += 1;
        }
    }
    sum / count as f64
}

/// Mean cosine similarity between the `(2k+1)²` patches centered at `a` and
/// `b` of a `T×H×W×D` feature clip. Offsets leaving the frame are clamped to
/// the border; zero-norm vectors contribute 0.
pub fn patch_correlation(feat: &Tensor, a: Pixel, b: Pixel, k: usize) -> Result<f64> {
    feat.expect_rank(4, "features")?;
    let dims = ClipDims::of(feat)?;
    let depth = feat.dims()[3];
    for p in [a, b] {
        if !p.in_bounds(dims) {
            return Err(Error::Range(format!("pixel {p:?} outside {dims:?}")));
        }
    }
    Ok(patch_corr(feat.data(), dims, depth, a, b, k))
}

/// Fills `affinity = S_lab + w_corr · S_corr` and `passes = affinity ≥ τ`.
pub fn score_stpa_edges(lab: &Tensor, feat: &Tensor, edges: &[Edge], cfg: &StpaConfig) -> Result<Vec<Edge>> {
    cfg.validate()?;
    let dims = ClipDims::of(lab)?;
    check_lab(lab, dims)?;
    let depth = check_features(feat, dims)?;
    check_edges(edges, dims)?;
    let tau = cfg.threshold();
    Ok(edges
        .iter()
        .map(|e| {
            let mut s = lab_similarity(lab, dims, e.a, e.b, cfg.theta);
            if cfg.w_corr != 0.0 {
                s += cfg.w_corr * patch_corr(feat.data(), dims, depth, e.a, e.b, cfg.k);
            }
            Edge {
                affinity: s,
                passes: s >= tau,
                ..*e
            }
        })
        .collect())
}

/// STPA loss on a `T×H×W` logit clip over the spatial-temporal edge set.
pub fn stpa_loss(
    mask_logits: &Tensor,
    lab: &Tensor,
    feat: &Tensor,
    edges: &[Edge],
    cfg: &StpaConfig,
) -> Result<LossResult> {
    mask_logits.expect_rank(3, "mask logits")?;
    let dims = ClipDims::of(mask_logits)?;
    check_lab(lab, dims)?;
    let scored = score_stpa_edges(lab, feat, edges, cfg)?;
    Ok(affinity_nll(mask_logits, dims, &scored))
}
