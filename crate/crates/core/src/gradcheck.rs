//! Central finite-difference checks of the analytic loss gradients on
//! random, non-degenerate inputs.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::boxes::{rasterize_box_mask, BoxEntry, BoxTrack, ClipDims};
use crate::boxlosses::{pairwise_affinity_loss, projection_loss, spatial_pair_set, LossResult, SpatialPairConfig};
use crate::error::{Error, Result};
use crate::reg::{bce_dice_loss, classification_loss, gaussian_blur_3d, tv3d_loss, BlurSpec};
use crate::rng::RngStream;
use crate::stpa::{center_offsets, stpa_loss, temporal_pair_set, StpaConfig};
use crate::tensor::{sigmoid, Tensor};

pub const FD_STEP: f64 = 1e-6;
pub const MAX_REL_ERROR: f64 = 1e-5;
/// Lower bound on the denominator of the relative error. Entries smaller
/// than this are compared absolutely; central differences at `h = 1e-6`
/// carry roughly `1e-10 · |f|` of rounding error, which would otherwise
/// dominate near-zero gradient entries.
pub const REL_ERROR_FLOOR: f64 = 1e-4;
/// Inputs whose max or TV terms come closer than this to a tie are redrawn.
const TIE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Projection,
    Pairwise,
    Stpa,
    Tv3d,
    BceDice,
    Classification,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Projection,
        LossKind::Pairwise,
        LossKind::Stpa,
        LossKind::Tv3d,
        LossKind::BceDice,
        LossKind::Classification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Projection => "projection",
            LossKind::Pairwise => "pairwise",
            LossKind::Stpa => "stpa",
            LossKind::Tv3d => "tv3d",
            LossKind::BceDice => "bce-dice",
            LossKind::Classification => "classification",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "proj" => LossKind::Projection,
            "pair" => LossKind::Pairwise,
            "3dtv" | "tv" => LossKind::Tv3d,
            "cls" => LossKind::Classification,
            _ => LossKind::ALL
                .into_iter()
                .find(|k| k.name() == s)
                .ok_or_else(|| Error::Argument(format!("unknown loss '{s}'")))?,
        };
        Ok(kind)
    }
}

/// Relative error with the denominator floored at [`REL_ERROR_FLOOR`].
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn finite_difference(f: impl Fn(&Tensor) -> Result<f64>, x: &Tensor, h: f64) -> Result<Tensor> {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.dims());
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// A loss with everything but the logits fixed.
pub struct Case {
    pub logits: Tensor,
    eval: Box<dyn Fn(&Tensor) -> Result<LossResult>>,
}

impl Case {
    pub fn eval(&self, logits: &Tensor) -> Result<LossResult> {
        (self.eval)(logits)
    }
}

fn random_dims(rng: &mut RngStream) -> Result<ClipDims> {
    Ok(ClipDims::new(
        rng.uniform_int(1, 3)? as usize,
        rng.uniform_int(2, 7)? as usize,
        rng.uniform_int(2, 7)? as usize,
    ))
}

fn random_tensor(dims: &[usize], lo: f64, hi: f64, rng: &mut RngStream) -> Result<Tensor> {
    let mut t = Tensor::zeros(dims);
    for v in t.data_mut() {
        *v = rng.uniform(lo, hi)?;
    }
    Ok(t)
}

/// A track with one random box in every frame.
pub fn random_track(dims: ClipDims, rng: &mut RngStream) -> Result<BoxTrack> {
    let mut entries = Vec::with_capacity(dims.frames);
    for frame in 0..dims.frames {
        let x0 = rng.uniform_int(0, dims.width as u64 - 1)? as usize;
        let y0 = rng.uniform_int(0, dims.height as u64 - 1)? as usize;
        let x1 = rng.uniform_int(x0 as u64 + 1, dims.width as u64)? as usize;
        let y1 = rng.uniform_int(y0 as u64 + 1, dims.height as u64)? as usize;
        entries.push(BoxEntry { frame, x0, y0, x1, y1 });
    }
    BoxTrack::new(1, entries)
}

/// LAB colors drawn from a few clusters so that some edges pass the
/// affinity threshold and some do not.
fn random_lab(dims: ClipDims, rng: &mut RngStream) -> Result<Tensor> {
    let palette = [[50.0, 0.0, 0.0], [52.0, 1.0, -1.0], [70.0, 20.0, 10.0]];
    let mut lab = Tensor::zeros(&[dims.frames, dims.height, dims.width, 3]);
    for px in lab.data_mut().chunks_mut(3) {
        let base = palette[rng.index(palette.len())?];
        for (v, b) in px.iter_mut().zip(base) {
            *v = b + rng.uniform(-0.5, 0.5)?;
        }
    }
    Ok(lab)
}

fn line_gap(values: impl Iterator<Item = f64>) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in values {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    first - second
}

/// Smallest gap between the largest and second largest logit over every row
/// and column of every frame.
fn min_projection_gap(z: &Tensor, dims: ClipDims) -> f64 {
    let at = |t: usize, y: usize, x: usize| z.data()[(t * dims.height + y) * dims.width + x];
    let mut gap = f64::INFINITY;
    for t in 0..dims.frames {
        for y in 0..dims.height {
            gap = gap.min(line_gap((0..dims.width).map(|x| at(t, y, x))));
        }
        for x in 0..dims.width {
            gap = gap.min(line_gap((0..dims.height).map(|y| at(t, y, x))));
        }
    }
    gap
}

fn min_tv_gap(z: &Tensor, dims: ClipDims) -> f64 {
    let m: Vec<f64> = z.data().iter().map(|&v| sigmoid(v)).collect();
    let (h, w) = (dims.height, dims.width);
    let mut gap = f64::INFINITY;
    for p in dims.pixels() {
        let i = p.index(dims);
        if p.x + 1 < w {
            gap = gap.min((m[i + 1] - m[i]).abs());
        }
        if p.y + 1 < h {
            gap = gap.min((m[i + w] - m[i]).abs());
        }
        if p.t + 1 < dims.frames {
            gap = gap.min((m[i + h * w] - m[i]).abs());
        }
    }
    gap
}

fn random_logits(
    dims: ClipDims,
    rng: &mut RngStream,
    gap: impl Fn(&Tensor, ClipDims) -> f64,
) -> Result<Tensor> {
    loop {
        let z = random_tensor(&dims.as_vec(), -3.0, 3.0, rng)?;
        if gap(&z, dims) > TIE_MARGIN {
            return Ok(z);
        }
    }
}

/// A random instance of `kind` with logits away from non-differentiable
/// points.
pub fn random_case(kind: LossKind, rng: &mut RngStream) -> Result<Case> {
    let dims = random_dims(rng)?;
    let case = match kind {
        LossKind::Projection => {
            let mask = rasterize_box_mask(&random_track(dims, rng)?, dims)?;
            Case {
                logits: random_logits(dims, rng, min_projection_gap)?,
                eval: Box::new(move |z| projection_loss(z, &mask)),
            }
        }
        LossKind::Pairwise => {
            let lab = random_lab(dims, rng)?;
            let mask = rasterize_box_mask(&random_track(dims, rng)?, dims)?;
            let edges = spatial_pair_set(dims, &mask)?;
            let cfg = SpatialPairConfig::default();
            Case {
                logits: random_tensor(&dims.as_vec(), -3.0, 3.0, rng)?,
                eval: Box::new(move |z| pairwise_affinity_loss(z, &lab, &edges, &cfg)),
            }
        }
        LossKind::Stpa => {
            let lab = random_lab(dims, rng)?;
            let feat = gaussian_blur_3d(&lab, &BlurSpec::default())?;
            let track = random_track(dims, rng)?;
            let mask = rasterize_box_mask(&track, dims)?;
            let cfg = StpaConfig::default();
            let tracks = std::slice::from_ref(&track);
            let mut edges = spatial_pair_set(dims, &mask)?;
            edges.extend(temporal_pair_set(dims, tracks, &center_offsets(tracks), &cfg)?);
            Case {
                logits: random_tensor(&dims.as_vec(), -3.0, 3.0, rng)?,
                eval: Box::new(move |z| stpa_loss(z, &lab, &feat, &edges, &cfg)),
            }
        }
        LossKind::Tv3d => Case {
            logits: random_logits(dims, rng, min_tv_gap)?,
            eval: Box::new(tv3d_loss),
        },
        LossKind::BceDice => {
            let target = random_tensor(&dims.as_vec(), 0.0, 1.0, rng)?;
            Case {
                logits: random_tensor(&dims.as_vec(), -3.0, 3.0, rng)?,
                eval: Box::new(move |z| bce_dice_loss(z, &target)),
            }
        }
        LossKind::Classification => {
            let rows = rng.uniform_int(1, 8)? as usize;
            let classes = rng.uniform_int(2, 10)? as usize;
            let targets = (0..rows).map(|_| rng.index(classes)).collect::<Result<Vec<_>>>()?;
            Case {
                logits: random_tensor(&[rows, classes], -3.0, 3.0, rng)?,
                eval: Box::new(move |z| classification_loss(z, &targets)),
            }
        }
    };
    Ok(case)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub loss: LossKind,
    pub points: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Points whose affinity losses had at least one passing edge (pairwise
    /// and STPA only; equals `points` otherwise).
    pub nontrivial_points: usize,
    pub passed: bool,
}

/// Compares analytic and finite-difference gradients at `points` random
/// inputs of `kind`.
pub fn grad_check(kind: LossKind, points: usize, seed: u64) -> Result<GradCheckReport> {
    let root = RngStream::new(seed);
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut nontrivial = 0;
    for p in 0..points {
        let mut rng = root.fork(p as u64);
        let case = random_case(kind, &mut rng)?;
        let analytic = case.eval(&case.logits)?;
        let numeric = finite_difference(|z| Ok(case.eval(z)?.value), &case.logits, FD_STEP)?;
        if analytic.value != 0.0 || !matches!(kind, LossKind::Pairwise | LossKind::Stpa) {
            nontrivial += 1;
        }
        for (&a, &n) in analytic.grad.data().iter().zip(numeric.data()) {
            max_rel = max_rel.max(rel_error(a, n));
            max_abs = max_abs.max((a - n).abs());
        }
    }
    Ok(GradCheckReport {
        loss: kind,
        points,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        nontrivial_points: nontrivial,
        passed: max_rel < MAX_REL_ERROR,
    })
}
