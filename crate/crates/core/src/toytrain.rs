//! Desk-scale demonstration: synthetic moving-shape clips with box labels,
//! per-pixel mask logits fitted by plain gradient descent under the box
//! losses, and IoU against the hidden ground-truth masks.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxes::{rasterize_box_mask, BoxEntry, BoxTrack, ClipDims};
use crate::boxlosses::{affinity_nll, projection_loss, score_spatial_edges, Edge, SpatialPairConfig};
use crate::clip::ClipSample;
use crate::error::{Error, Result};
use crate::reg::{gaussian_blur_3d, total_loss, tv3d_loss, BlurSpec, LossConfig, LossParts};
use crate::rng::RngStream;
use crate::stpa::{instance_pair_set, score_stpa_edges, StpaConfig};
use crate::tensor::Tensor;

/// Color distance below which two regions would pass the default LAB
/// affinity threshold: `θ · ln(1/τ_lab)` with θ = 2, τ_lab = 0.3.
pub fn min_color_separation() -> f64 {
    2.0 * (1.0f64 / 0.3).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Shape {
    Rectangle { width: f64, height: f64 },
    Disk { radius: f64 },
}

impl Shape {
    fn covers(&self, cx: f64, cy: f64, px: f64, py: f64) -> bool {
        match *self {
            Shape::Rectangle { width, height } => {
                let (x0, y0) = (cx - width / 2.0, cy - height / 2.0);
                px >= x0 && px < x0 + width && py >= y0 && py < y0 + height
            }
            Shape::Disk { radius } => (px - cx).powi(2) + (py - cy).powi(2) <= radius * radius,
        }
    }

    fn half_extent(&self) -> (f64, f64) {
        match *self {
            Shape::Rectangle { width, height } => (width / 2.0, height / 2.0),
            Shape::Disk { radius } => (radius, radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub shape: Shape,
    /// LAB color.
    pub color: [f64; 3],
    /// Center in frame 0, continuous pixel coordinates.
    pub start: [f64; 2],
    /// Pixels per frame.
    pub velocity: [f64; 2],
}

impl InstanceSpec {
    fn center(&self, t: usize) -> (f64, f64) {
        (
            self.start[0] + t as f64 * self.velocity[0],
            self.start[1] + t as f64 * self.velocity[1],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Later instances occlude earlier ones.
    pub instances: Vec<InstanceSpec>,
    pub background: [f64; 3],
    /// Per-channel Gaussian noise added to the LAB frames.
    pub noise_std: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            frames: 3,
            height: 48,
            width: 48,
            instances: Vec::new(),
            background: [50.0, 0.0, 0.0],
            noise_std: 0.0,
        }
    }
}

fn color_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Spec("scene dims must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Spec(format!("bad noise std {}", self.noise_std)));
        }
        let min_sep = min_color_separation();
        let mut colors = vec![self.background];
        for (i, inst) in self.instances.iter().enumerate() {
            let (hx, hy) = inst.shape.half_extent();
            if !(hx > 0.0 && hy > 0.0) {
                return Err(Error::Spec(format!("instance {i} has an empty shape")));
            }
            for t in 0..self.frames {
                let (cx, cy) = inst.center(t);
                if cx - hx < 0.0 || cy - hy < 0.0 || cx + hx > self.width as f64 || cy + hy > self.height as f64 {
                    return Err(Error::Spec(format!("instance {i} leaves the frame at t = {t}")));
                }
            }
            if let Some(c) = colors.iter().find(|c| color_dist(c, &inst.color) <= min_sep) {
                return Err(Error::Spec(format!(
                    "instance {i} color {:?} too close to {c:?}",
                    inst.color
                )));
            }
            colors.push(inst.color);
        }
        Ok(())
    }

    pub fn dims(&self) -> ClipDims {
        ClipDims::new(self.frames, self.height, self.width)
    }
}

/// Tight box of a binary `T×H×W` mask per frame; frames where the mask is
/// empty get no entry.
pub fn tight_boxes(instance_id: i64, mask: &Tensor) -> Result<BoxTrack> {
    let dims = ClipDims::of(mask)?;
    let mut entries = Vec::new();
    for t in 0..dims.frames {
        let mut ext: Option<(usize, usize, usize, usize)> = None;
        for y in 0..dims.height {
            for x in 0..dims.width {
                if mask.get(&[t, y, x]) > 0.5 {
                    ext = Some(match ext {
                        None => (x, y, x + 1, y + 1),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
                    });
                }
            }
        }
        if let Some((x0, y0, x1, y1)) = ext {
            entries.push(BoxEntry { frame: t, x0, y0, x1, y1 });
        }
    }
    BoxTrack::new(instance_id, entries)
}

/// Renders the scene. Frames are `H×W×3` LAB images; `gt_masks` is
/// `N×T×H×W`; instance ids are `1..=N`.
pub fn generate_scene(spec: &SceneSpec, rng: &mut RngStream) -> Result<ClipSample> {
    spec.validate()?;
    let (tn, h, w) = (spec.frames, spec.height, spec.width);
    let n = spec.instances.len();
    let mut owner = vec![None::<usize>; tn * h * w];
    for t in 0..tn {
        for (i, inst) in spec.instances.iter().enumerate() {
            let (cx, cy) = inst.center(t);
            for y in 0..h {
                for x in 0..w {
                    if inst.shape.covers(cx, cy, x as f64 + 0.5, y as f64 + 0.5) {
                        owner[(t * h + y) * w + x] = Some(i);
                    }
                }
            }
        }
    }
    let mut gt = Tensor::zeros(&[n, tn, h, w]);
    let mut frames = Vec::with_capacity(tn);
    for t in 0..tn {
        let mut frame = Tensor::zeros(&[h, w, 3]);
        for y in 0..h {
            for x in 0..w {
                let o = owner[(t * h + y) * w + x];
                let color = match o {
                    Some(i) => {
                        gt.set(&[i, t, y, x], 1.0);
                        spec.instances[i].color
                    }
                    None => spec.background,
                };
                for (c, &v) in color.iter().enumerate() {
                    let noise = if spec.noise_std > 0.0 { rng.normal(0.0, spec.noise_std)? } else { 0.0 };
                    frame.set(&[y, x, c], v + noise);
                }
            }
        }
        frames.push(frame);
    }
    let tracks = (0..n)
        .map(|i| tight_boxes(i as i64 + 1, &gt.slice_first(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClipSample {
        frames,
        tracks,
        gt_masks: Some(gt),
    })
}

fn random_color(rng: &mut RngStream) -> Result<[f64; 3]> {
    Ok([rng.uniform(25.0, 85.0)?, rng.uniform(-50.0, 50.0)?, rng.uniform(-50.0, 50.0)?])
}

/// Contrast kept between scene colors in [`random_scene_spec`], well above
/// [`min_color_separation`].
pub const RANDOM_SCENE_CONTRAST: f64 = 20.0;

/// A 3×48×48 scene with one or two shapes moving at least 4 px/frame and
/// mild color noise.
pub fn random_scene_spec(rng: &mut RngStream) -> Result<SceneSpec> {
    let mut spec = SceneSpec {
        background: random_color(rng)?,
        noise_std: 1.0,
        ..SceneSpec::default()
    };
    let count = rng.uniform_int(1, 2)? as usize;
    let mut colors = vec![spec.background];
    while spec.instances.len() < count {
        let shape = if rng.uniform_int(0, 1)? == 0 {
            Shape::Rectangle {
                width: rng.uniform_int(8, 16)? as f64,
                height: rng.uniform_int(8, 16)? as f64,
            }
        } else {
            Shape::Disk {
                radius: rng.uniform(4.5, 8.0)?,
            }
        };
        let speed = rng.uniform(4.0, 6.0)?;
        let heading = rng.uniform(0.0, std::f64::consts::TAU)?;
        let velocity = [speed * heading.cos(), speed * heading.sin()];
        let (hx, hy) = shape.half_extent();
        let span = (spec.frames - 1) as f64;
        let lo_x = hx - velocity[0].min(0.0) * span;
        let hi_x = spec.width as f64 - hx - velocity[0].max(0.0) * span;
        let lo_y = hy - velocity[1].min(0.0) * span;
        let hi_y = spec.height as f64 - hy - velocity[1].max(0.0) * span;
        if lo_x > hi_x || lo_y > hi_y {
            continue;
        }
        let start = [rng.uniform(lo_x, hi_x)?, rng.uniform(lo_y, hi_y)?];
        let color = loop {
            let c = random_color(rng)?;
            if colors.iter().all(|o| color_dist(o, &c) > RANDOM_SCENE_CONTRAST) {
                break c;
            }
        };
        colors.push(color);
        spec.instances.push(InstanceSpec {
            shape,
            color,
            start,
            velocity,
        });
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recipe {
    #[serde(rename = "proj")]
    Proj,
    #[serde(rename = "proj+pair")]
    ProjPair,
    #[serde(rename = "proj+stpa")]
    ProjStpa,
    /// 3D TV while γ = 1, then STPA.
    #[serde(rename = "proj+3dtv->stpa")]
    ProjTvStpa,
}

impl Recipe {
    pub const ALL: [Recipe; 4] = [Recipe::Proj, Recipe::ProjPair, Recipe::ProjStpa, Recipe::ProjTvStpa];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Proj => "proj",
            Recipe::ProjPair => "proj+pair",
            Recipe::ProjStpa => "proj+stpa",
            Recipe::ProjTvStpa => "proj+3dtv->stpa",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown recipe '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub recipe: Recipe,
    pub stpa: StpaConfig,
    pub loss: LossConfig,
    pub blur: BlurSpec,
    /// Standard deviation of the seeded Gaussian logit initialization. Only
    /// there to break projection argmax ties.
    pub init_std: f64,
    /// Seed for scene generation and logit initialization.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 400,
            lr: 100.0,
            recipe: Recipe::ProjStpa,
            stpa: StpaConfig::default(),
            loss: LossConfig::default(),
            blur: BlurSpec::default(),
            init_std: 1e-9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Argument("steps must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Argument(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::Argument(format!("init std must be non-negative, got {}", self.init_std)));
        }
        self.stpa.validate()?;
        self.loss.validate()?;
        self.blur.validate()
    }

    /// Epoch the given step stands for, spreading `total_epochs` evenly
    /// over the steps.
    fn epoch(&self, step: usize) -> usize {
        step * self.loss.total_epochs / self.steps
    }
}

/// One row of the loss log. Components are summed over instances; `pair`
/// and `stpa` hold the affinity term of the respective recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossLogRow {
    pub step: usize,
    pub total: f64,
    pub proj: f64,
    pub pair: f64,
    pub stpa: f64,
    pub tv3d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// `N×T×H×W` mask logits.
    pub logits: Tensor,
    /// Rows for steps `0..=steps`; the last row is the loss of the final
    /// logits.
    pub log: Vec<LossLogRow>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.total)
    }

    pub fn log_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.log {
            w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
        }
        finish_csv(w)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

struct InstanceTerms {
    box_mask: Tensor,
    edges: Vec<Edge>,
}

fn instance_terms(
    clip_dims: ClipDims,
    track: &BoxTrack,
    lab: &Tensor,
    feat: &Tensor,
    cfg: &TrainConfig,
) -> Result<InstanceTerms> {
    let box_mask = rasterize_box_mask(track, clip_dims)?;
    let edges = match cfg.recipe {
        Recipe::Proj => Vec::new(),
        Recipe::ProjPair => {
            let pair_cfg = SpatialPairConfig {
                theta: cfg.stpa.theta,
                tau_lab: cfg.stpa.tau_lab,
            };
            let raw = instance_pair_set(clip_dims, track, &cfg.stpa, false)?;
            score_spatial_edges(lab, &raw, &pair_cfg)?
        }
        Recipe::ProjStpa | Recipe::ProjTvStpa => {
            let raw = instance_pair_set(clip_dims, track, &cfg.stpa, true)?;
            score_stpa_edges(lab, feat, &raw, &cfg.stpa)?
        }
    };
    Ok(InstanceTerms { box_mask, edges })
}

/// Fits one logit map per instance, starting from zero, by plain gradient
/// descent on the recipe's loss.
pub fn optimize_masks(scene: &ClipSample, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let lab = scene.stacked()?;
    if lab.rank() != 4 || lab.dims()[3] != 3 {
        return Err(Error::Argument(format!("scene frames must be H×W×3 LAB, got {:?}", lab.dims())));
    }
    let dims = ClipDims::of(&lab)?;
    let feat = gaussian_blur_3d(&lab, &cfg.blur)?;
    let terms = scene
        .tracks
        .iter()
        .map(|t| instance_terms(dims, t, &lab, &feat, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut loss_cfg = cfg.loss;
    if cfg.recipe != Recipe::ProjTvStpa {
        loss_cfg.gamma_switch_epoch = 0;
    }
    let n = terms.len();
    let frame = dims.len();
    let mut logits = Tensor::zeros(&[n, dims.frames, dims.height, dims.width]);
    if cfg.init_std > 0.0 {
        let mut rng = RngStream::new(cfg.seed).fork(0x1417);
        for z in logits.data_mut() {
            *z = rng.normal(0.0, cfg.init_std)?;
        }
    }
    let mut log = Vec::with_capacity(cfg.steps + 1);
    for step in 0..=cfg.steps {
        let epoch = cfg.epoch(step.min(cfg.steps - 1));
        let gamma = loss_cfg.gamma(epoch);
        let mut row = LossLogRow { step, total: 0.0, proj: 0.0, pair: 0.0, stpa: 0.0, tv3d: 0.0 };
        let mut grads = Vec::with_capacity(n);
        for (i, term) in terms.iter().enumerate() {
            let z = logits.slice_first(i);
            let proj = projection_loss(&z, &term.box_mask)?;
            let aff = if cfg.recipe == Recipe::Proj || gamma == 1.0 {
                None
            } else {
                Some(affinity_nll(&z, dims, &term.edges))
            };
            let tv = if gamma > 0.0 && cfg.recipe == Recipe::ProjTvStpa {
                Some(tv3d_loss(&z)?)
            } else {
                None
            };
            let parts = LossParts {
                cls: 0.0,
                proj: proj.value,
                tv3d: tv.as_ref().map_or(0.0, |r| r.value),
                affinity: aff.as_ref().map_or(0.0, |r| r.value),
            };
            row.total += total_loss(&parts, &loss_cfg, epoch);
            row.proj += parts.proj;
            row.tv3d += parts.tv3d;
            match cfg.recipe {
                Recipe::ProjPair => row.pair += parts.affinity,
                Recipe::ProjStpa | Recipe::ProjTvStpa => row.stpa += parts.affinity,
                Recipe::Proj => {}
            }
            let w = loss_cfg.lambda2;
            let mut g = proj.grad.into_data();
            if let Some(tv) = &tv {
                for (gi, v) in g.iter_mut().zip(tv.grad.data()) {
                    *gi += gamma * v;
                }
            }
            if let Some(aff) = &aff {
                for (gi, v) in g.iter_mut().zip(aff.grad.data()) {
                    *gi += (1.0 - gamma) * v;
                }
            }
            g.iter_mut().for_each(|v| *v *= w);
            grads.push(g);
        }
        check_finite(step, row.total)?;
        log.push(row);
        if step == cfg.steps {
            break;
        }
        let data = logits.data_mut();
        for (i, g) in grads.iter().enumerate() {
            for (z, gv) in data[i * frame..(i + 1) * frame].iter_mut().zip(g) {
                *z -= cfg.lr * gv;
            }
        }
    }
    Ok(TrainOutcome { logits, log })
}

fn check_finite(step: usize, total: f64) -> Result<()> {
    if total.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            step,
            message: format!("total loss is {total}"),
        })
    }
}

/// `|a ∩ b| / |a ∪ b|` of two binary masks (values > 0.5 count as set);
/// two empty masks give 1.
pub fn mask_iou(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Argument(format!("mask dims differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&u, &v) in a.data().iter().zip(b.data()) {
        let (u, v) = (u > 0.5, v > 0.5);
        inter += (u && v) as usize;
        union += (u || v) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Mean over instances of the clip-level IoU between `logits > 0` and the
/// ground-truth masks (both `N×T×H×W`).
pub fn clip_iou(logits: &Tensor, gt_masks: &Tensor) -> Result<f64> {
    if logits.dims() != gt_masks.dims() || logits.rank() != 4 {
        return Err(Error::Argument(format!(
            "logits {:?} and masks {:?} must both be N×T×H×W",
            logits.dims(),
            gt_masks.dims()
        )));
    }
    let n = logits.dims()[0];
    if n == 0 {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        let pred = logits.slice_first(i).map(|z| if z > 0.0 { 1.0 } else { 0.0 });
        total += mask_iou(&pred, &gt_masks.slice_first(i))?;
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub scene: usize,
    pub recipe: Recipe,
    pub seed: u64,
    pub iou: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// Mean IoU and mean final loss per recipe, in first-appearance order.
    pub fn summary(&self) -> Vec<(Recipe, f64, f64)> {
        let mut order: Vec<Recipe> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.recipe) {
                order.push(r.recipe);
            }
        }
        order
            .into_iter()
            .map(|recipe| {
                let rows: Vec<&AblationRow> = self.rows.iter().filter(|r| r.recipe == recipe).collect();
                let k = rows.len() as f64;
                let iou = rows.iter().map(|r| r.iou).sum::<f64>() / k;
                let loss = rows.iter().map(|r| r.final_loss).sum::<f64>() / k;
                (recipe, iou, loss)
            })
            .collect()
    }

    pub fn mean_iou(&self, recipe: Recipe) -> Option<f64> {
        self.summary().into_iter().find(|s| s.0 == recipe).map(|s| s.1)
    }

    /// Data rows followed by one `mean,<recipe>,,<iou>,<loss>` row per
    /// recipe.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["scene", "recipe", "seed", "iou", "final_loss"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.scene.to_string(),
                r.recipe.to_string(),
                r.seed.to_string(),
                r.iou.to_string(),
                r.final_loss.to_string(),
            ])
            .map_err(err)?;
        }
        for (recipe, iou, loss) in self.summary() {
            w.write_record(["mean".to_string(), recipe.to_string(), String::new(), iou.to_string(), loss.to_string()])
                .map_err(err)?;
        }
        finish_csv(w)
    }
}

/// Every (scene, recipe, seed) cell: the scene is rendered with the cell's
/// seed and fitted with `base` switched to the cell's recipe. Cells run on
/// `threads` workers; row order is fixed regardless.
pub fn run_ablation(
    scenes: &[SceneSpec],
    recipes: &[Recipe],
    seeds: &[u64],
    base: &TrainConfig,
    threads: usize,
) -> Result<AblationTable> {
    let mut cells = Vec::new();
    for (s, _) in scenes.iter().enumerate() {
        for &recipe in recipes {
            for &seed in seeds {
                cells.push((s, recipe, seed));
            }
        }
    }
    let run = |&(s, recipe, seed): &(usize, Recipe, u64)| -> Result<AblationRow> {
        let clip = generate_scene(&scenes[s], &mut RngStream::new(seed))?;
        let cfg = TrainConfig { recipe, seed, ..*base };
        let out = optimize_masks(&clip, &cfg)?;
        let gt = clip.gt_masks.as_ref().expect("generated scenes carry masks");
        Ok(AblationRow {
            scene: s,
            recipe,
            seed,
            iou: clip_iou(&out.logits, gt)?,
            final_loss: out.final_loss(),
        })
    };
    let rows = if threads <= 1 {
        cells.iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run).collect::<Result<Vec<_>>>())?
    };
    Ok(AblationTable { rows })
}
