//! Frame-level box-supervised losses: the projection loss and the spatial
//! pairwise affinity loss.
//!
//! Every loss takes raw mask logits and returns the value together with the
//! exact gradient with respect to those logits.

use serde::{Deserialize, Serialize};

use crate::boxes::{ClipDims, Pixel};
use crate::dice::dice_loss_with_grad;
use crate::error::{Error, Result};
use crate::tensor::{sigmoid, Tensor};

/// Lower clamp applied to `P(y_e = 1)` before taking the log.
pub const PROB_FLOOR: f64 = 1e-6;

/// Loss value plus gradient with respect to the mask logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: Tensor,
}

impl LossResult {
    pub fn zero(dims: &[usize]) -> Self {
        Self {
            value: 0.0,
            grad: Tensor::zeros(dims),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpatialPairConfig {
    /// Color temperature of the LAB similarity.
    pub theta: f64,
    /// Similarity threshold for an edge to count.
    pub tau_lab: f64,
}

impl Default for SpatialPairConfig {
    fn default() -> Self {
        Self {
            theta: 2.0,
            tau_lab: 0.3,
        }
    }
}

impl SpatialPairConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Argument(format!("theta must be positive, got {}", self.theta)));
        }
        if !self.tau_lab.is_finite() {
            return Err(Error::Argument("tau_lab must be finite".into()));
        }
        Ok(())
    }
}

/// A pair of pixels. `affinity` and `passes` are filled in by the scoring
/// functions; freshly enumerated edges carry `0.0` and `false`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: Pixel,
    pub b: Pixel,
    pub affinity: f64,
    pub passes: bool,
}

impl Edge {
    pub fn new(a: Pixel, b: Pixel) -> Self {
        debug_assert_ne!(a, b);
        Self {
            a,
            b,
            affinity: 0.0,
            passes: false,
        }
    }
}

/// Per-frame max projections of a `T×H×W` field, concatenated over frames,
/// with the linear index each maximum came from (first index on ties).
pub(crate) struct Projections {
    pub along_x: Vec<f64>,
    pub along_x_arg: Vec<usize>,
    pub along_y: Vec<f64>,
    pub along_y_arg: Vec<usize>,
}

/// `along_x[t·W + x] = max_y v(t, y, x)`; `along_y[t·H + y] = max_x v(t, y, x)`.
pub(crate) fn project(values: &[f64], dims: ClipDims) -> Projections {
    let ClipDims {
        frames,
        height,
        width,
    } = dims;
    let mut along_x = vec![f64::NEG_INFINITY; frames * width];
    let mut along_x_arg = vec![0; frames * width];
    let mut along_y = vec![f64::NEG_INFINITY; frames * height];
    let mut along_y_arg = vec![0; frames * height];
    for t in 0..frames {
        for y in 0..height {
            for x in 0..width {
                let i = (t * height + y) * width + x;
                let v = values[i];
                let cx = t * width + x;
                if v > along_x[cx] {
                    along_x[cx] = v;
                    along_x_arg[cx] = i;
                }
                let cy = t * height + y;
                if v > along_y[cy] {
                    along_y[cy] = v;
                    along_y_arg[cy] = i;
                }
            }
        }
    }
    Projections {
        along_x,
        along_x_arg,
        along_y,
        along_y_arg,
    }
}

/// Horizontal and vertical max projections of an `H×W` probability map:
/// `proj_x[w] = max_y m(y, w)` and `proj_y[h] = max_x m(h, x)`.
pub fn axis_projections(mask_prob: &Tensor) -> Result<(Tensor, Tensor)> {
    mask_prob.expect_rank(2, "mask probabilities")?;
    if mask_prob.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Range("mask probabilities must lie in [0, 1]".into()));
    }
    let dims = ClipDims::of(mask_prob)?;
    let p = project(mask_prob.data(), dims);
    Ok((
        Tensor::new(vec![dims.width], p.along_x)?,
        Tensor::new(vec![dims.height], p.along_y)?,
    ))
}

fn check_binary(mask: &Tensor, what: &str) -> Result<()> {
    if mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Argument(format!("{what} must be binary")));
    }
    Ok(())
}

/// Dice loss between the x/y max projections of `σ(logits)` and of the box
/// mask. Accepts `H×W` or `T×H×W`; clips project per frame and the
/// projections of all frames are concatenated before the Dice terms.
///
/// The gradient through each max is routed to its argmax. Since `σ` is
/// monotone, maxima are located on the logits, which keeps saturated ties
/// resolved by index rather than by rounding.
pub fn projection_loss(mask_logits: &Tensor, box_mask: &Tensor) -> Result<LossResult> {
    if !matches!(mask_logits.rank(), 2 | 3) {
        return Err(Error::Argument(format!(
            "mask logits must be H×W or T×H×W, got {:?}",
            mask_logits.dims()
        )));
    }
    box_mask.expect_dims(mask_logits.dims(), "box mask")?;
    check_binary(box_mask, "box mask")?;
    let dims = ClipDims::of(mask_logits)?;

    let lp = project(mask_logits.data(), dims);
    let bp = project(box_mask.data(), dims);
    let px: Vec<f64> = lp.along_x.iter().map(|&z| sigmoid(z)).collect();
    let py: Vec<f64> = lp.along_y.iter().map(|&z| sigmoid(z)).collect();

    let (vx, gx) = dice_loss_with_grad(&px, &bp.along_x);
    let (vy, gy) = dice_loss_with_grad(&py, &bp.along_y);

    let mut grad = Tensor::zeros(mask_logits.dims());
    let g = grad.data_mut();
    for ((&p, &d), &i) in px.iter().zip(&gx).zip(&lp.along_x_arg) {
        g[i] += d * p * (1.0 - p);
    }
    for ((&p, &d), &i) in py.iter().zip(&gy).zip(&lp.along_y_arg) {
        g[i] += d * p * (1.0 - p);
    }
    Ok(LossResult {
        value: vx + vy,
        grad,
    })
}

fn lab_at(lab: &Tensor, dims: ClipDims, p: Pixel) -> &[f64] {
    let i = p.index(dims) * 3;
    &lab.data()[i..i + 3]
}

pub(crate) fn check_lab(lab: &Tensor, dims: ClipDims) -> Result<()> {
    lab.expect_dims(&[dims.frames, dims.height, dims.width, 3], "LAB image")
}

pub(crate) fn lab_similarity(lab: &Tensor, dims: ClipDims, a: Pixel, b: Pixel, theta: f64) -> f64 {
    let (ca, cb) = (lab_at(lab, dims, a), lab_at(lab, dims, b));
    let dist = ca
        .iter()
        .zip(cb)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt();
    (-dist / theta).exp()
}

/// `exp(-‖c_a − c_b‖ / θ)` for two pixels of a `T×H×W×3` LAB clip.
pub fn color_similarity(lab: &Tensor, a: Pixel, b: Pixel, theta: f64) -> Result<f64> {
    lab.expect_rank(4, "LAB image")?;
    let dims = ClipDims::of(lab)?;
    check_lab(lab, dims)?;
    if !(theta > 0.0) {
        return Err(Error::Argument(format!("theta must be positive, got {theta}")));
    }
    for p in [a, b] {
        if !p.in_bounds(dims) {
            return Err(Error::Range(format!("pixel {p:?} outside {dims:?}")));
        }
    }
    Ok(lab_similarity(lab, dims, a, b, theta))
}

/// Union of the per-instance box masks, as a `T×H×W` occupancy array.
/// Accepts a `T×H×W` mask or an `N×T×H×W` stack.
pub(crate) fn box_union(dims: ClipDims, box_masks: &Tensor) -> Result<Vec<bool>> {
    let len = dims.len();
    match box_masks.rank() {
        3 => box_masks.expect_dims(&dims.as_vec(), "box masks")?,
        4 => box_masks.expect_dims(
            &[box_masks.dims()[0], dims.frames, dims.height, dims.width],
            "box masks",
        )?,
        _ => {
            return Err(Error::Argument(format!(
                "box masks must be T×H×W or N×T×H×W, got {:?}",
                box_masks.dims()
            )))
        }
    }
    let mut inside = vec![false; len];
    for chunk in box_masks.data().chunks_exact(len) {
        for (o, &v) in inside.iter_mut().zip(chunk) {
            *o |= v > 0.5;
        }
    }
    Ok(inside)
}

/// Right and bottom neighbor edges within each frame, keeping only edges
/// with at least one endpoint inside the union of the frame's boxes.
/// Order: frame, row, column; right edge before bottom edge.
pub fn spatial_pair_set(dims: ClipDims, box_masks: &Tensor) -> Result<Vec<Edge>> {
    let inside = box_union(dims, box_masks)?;
    let mut edges = Vec::new();
    for p in dims.pixels() {
        let in_a = inside[p.index(dims)];
        let mut push = |q: Pixel| {
            if in_a || inside[q.index(dims)] {
                edges.push(Edge::new(p, q));
            }
        };
        if p.x + 1 < dims.width {
            push(Pixel::new(p.t, p.x + 1, p.y));
        }
        if p.y + 1 < dims.height {
            push(Pixel::new(p.t, p.x, p.y + 1));
        }
    }
    Ok(edges)
}

pub(crate) fn check_edges(edges: &[Edge], dims: ClipDims) -> Result<()> {
    for e in edges {
        if !e.a.in_bounds(dims) || !e.b.in_bounds(dims) {
            return Err(Error::Range(format!("edge {e:?} outside clip {dims:?}")));
        }
    }
    Ok(())
}

/// Fills `affinity = S_lab` and `passes = S_lab ≥ τ` on each edge.
pub fn score_spatial_edges(lab: &Tensor, edges: &[Edge], cfg: &SpatialPairConfig) -> Result<Vec<Edge>> {
    cfg.validate()?;
    let dims = ClipDims::of(lab)?;
    check_lab(lab, dims)?;
    check_edges(edges, dims)?;
    Ok(edges
        .iter()
        .map(|e| {
            let s = lab_similarity(lab, dims, e.a, e.b, cfg.theta);
            Edge {
                affinity: s,
                passes: s >= cfg.tau_lab,
                ..*e
            }
        })
        .collect())
}

/// `-(1/N) Σ_{passing e} log clamp(P(y_e = 1))` over scored edges, with
/// `P = M_a M_b + (1 − M_a)(1 − M_b)` and `N` the passing-edge count.
pub(crate) fn affinity_nll(mask_logits: &Tensor, dims: ClipDims, edges: &[Edge]) -> LossResult {
    let n = edges.iter().filter(|e| e.passes).count();
    if n == 0 {
        return LossResult::zero(mask_logits.dims());
    }
    let prob: Vec<f64> = mask_logits.data().iter().map(|&z| sigmoid(z)).collect();
    let mut grad = Tensor::zeros(mask_logits.dims());
    let g = grad.data_mut();
    let scale = 1.0 / n as f64;
    let mut total = 0.0;
    for e in edges.iter().filter(|e| e.passes) {
        let (ia, ib) = (e.a.index(dims), e.b.index(dims));
        let (ma, mb) = (prob[ia], prob[ib]);
        let p = ma * mb + (1.0 - ma) * (1.0 - mb);
        if p < PROB_FLOOR {
            total -= PROB_FLOOR.ln();
            continue;
        }
        let p = p.min(1.0);
        total -= p.ln();
        g[ia] -= scale * (2.0 * mb - 1.0) / p * ma * (1.0 - ma);
        g[ib] -= scale * (2.0 * ma - 1.0) / p * mb * (1.0 - mb);
    }
    LossResult {
        value: total * scale,
        grad,
    }
}

/// Spatial pairwise affinity loss over `edges` on a `T×H×W` logit clip with
/// `T×H×W×3` LAB colors.
pub fn pairwise_affinity_loss(
    mask_logits: &Tensor,
    lab: &Tensor,
    edges: &[Edge],
    cfg: &SpatialPairConfig,
) -> Result<LossResult> {
    mask_logits.expect_rank(3, "mask logits")?;
    let dims = ClipDims::of(mask_logits)?;
    check_lab(lab, dims)?;
    let scored = score_spatial_edges(lab, edges, cfg)?;
    Ok(affinity_nll(mask_logits, dims, &scored))
}
