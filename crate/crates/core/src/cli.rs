//! Command-line front end. [`run`] parses arguments, resolves configuration
//! (built-in defaults, then the `--config` JSON file, then flags), prints the
//! resolved configuration and dispatches to a subcommand.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 numeric failure
//! (divergence or a failed gradient check).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::boxes::{rasterize_box_mask, BoxTrack, ClipDims};
use crate::boxlosses::{pairwise_affinity_loss, projection_loss, spatial_pair_set, LossResult, SpatialPairConfig};
use crate::datasetkit::augment::{augment_image_to_clip, AugSpec, ImageBox};
use crate::datasetkit::cost::{annotation_cost, SECONDS_PER_BOX, SECONDS_PER_MASK};
use crate::datasetkit::manifest::DatasetManifest;
use crate::datasetkit::sampling::weighted_sample;
use crate::datasetkit::taxonomy::{self, merge_category_maps, CategoryMergeRule, Taxonomy};
use crate::error::{Error, Result};
use crate::gradcheck::{grad_check, random_track, LossKind};
use crate::reg::{bce_dice_loss, classification_loss, gaussian_blur_3d, tv3d_loss, BlurSpec};
use crate::rng::RngStream;
use crate::stpa::{center_offsets, stpa_loss, temporal_pair_set, StpaConfig};
use crate::tensor::Tensor;
use crate::toytrain::{
    clip_iou, generate_scene, optimize_masks, random_scene_spec, run_ablation, Recipe, SceneSpec, TrainConfig,
};

#[derive(Debug, Parser)]
#[command(name = "boxvis", version, about = "Box-supervised video instance segmentation toolkit")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (JSON or CSV depending on the subcommand); stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for subcommands that parallelize.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one loss and its gradient.
    LossEval(LossEvalArgs),
    /// Compare analytic gradients with central finite differences.
    GradCheck(GradCheckArgs),
    /// Turn a still image into an augmented pseudo clip.
    ClipGen(ClipGenArgs),
    /// Merge category taxonomies.
    MergeCats(MergeCatsArgs),
    /// Annotation effort in worker days.
    Cost(CostArgs),
    /// Draw (source, item) pairs from a dataset manifest.
    Sample(SampleArgs),
    /// Fit masks on one synthetic scene.
    ToyTrain(ToyTrainArgs),
    /// Run recipes over synthetic scenes and seeds.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
struct LossEvalArgs {
    /// projection, pairwise, stpa, tv3d, bce-dice or classification.
    #[arg(long)]
    loss: LossKind,
    /// Logits tensor (JSON). Without it, all inputs are drawn from the seed.
    #[arg(long)]
    logits: Option<PathBuf>,
    /// T×H×W×3 LAB tensor (pairwise, stpa).
    #[arg(long)]
    lab: Option<PathBuf>,
    /// Box mask tensor (projection, pairwise).
    #[arg(long)]
    box_mask: Option<PathBuf>,
    /// Box tracks as a JSON list (stpa).
    #[arg(long)]
    boxes: Option<PathBuf>,
    /// Soft target tensor (bce-dice).
    #[arg(long)]
    target: Option<PathBuf>,
    /// Class targets as a JSON list (classification).
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    tau_lab: Option<f64>,
    #[arg(long)]
    w_corr: Option<f64>,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    /// A loss name or "all".
    #[arg(long, default_value = "all")]
    loss: String,
    /// Random points per loss.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Args)]
struct ClipGenArgs {
    /// H×W×3 image tensor (JSON). Without it a synthetic image is drawn.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Boxes on the image as a JSON list of {instance_id, x0, y0, x1, y1}.
    #[arg(long)]
    boxes: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    resize: Option<Vec<u32>>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    crop: Option<Vec<u32>>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
    rotation: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct MergeCatsArgs {
    /// JSON list of taxonomies; the built-in YTVIS21, OVIS and COCO lists
    /// when absent.
    #[arg(long)]
    taxonomies: Option<PathBuf>,
    /// JSON list of merge rules; the built-in rules when absent.
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CostArgs {
    #[arg(long)]
    objects: u64,
    #[arg(long, default_value_t = SECONDS_PER_BOX)]
    seconds_per_box: f64,
    #[arg(long, default_value_t = SECONDS_PER_MASK)]
    seconds_per_mask: f64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Number of draws.
    #[arg(long, short = 'n', default_value_t = 10_000)]
    draws: usize,
}

#[derive(Debug, Args)]
struct TrainFlags {
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    init_std: Option<f64>,
}

#[derive(Debug, Args)]
struct ToyTrainArgs {
    /// Scene description (JSON); drawn from the seed when absent.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// proj, proj+pair, proj+stpa or proj+3dtv->stpa.
    #[arg(long)]
    recipe: Option<Recipe>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// Number of random scenes, drawn from the seed.
    #[arg(long, default_value_t = 10)]
    scenes: usize,
    /// Comma-separated recipes.
    #[arg(long, value_delimiter = ',')]
    recipes: Option<Vec<Recipe>>,
    /// Comma-separated noise/initialization seeds per scene.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[command(flatten)]
    train: TrainFlags,
}

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    threads: Option<usize>,
    pair: Option<SpatialPairConfig>,
    stpa: Option<StpaConfig>,
    blur: Option<BlurSpec>,
    aug: Option<AugSpec>,
    train: Option<TrainConfig>,
    points: Option<usize>,
}

struct Ctx<'a> {
    seed: u64,
    threads: usize,
    out: Option<PathBuf>,
    file: FileConfig,
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn print(&mut self, line: impl AsRef<str>) -> Result<()> {
        writeln!(self.stdout, "{}", line.as_ref()).map_err(|e| Error::io("<stdout>", e))
    }

    fn resolved(&mut self, command: &str, mut extra: Value) -> Result<()> {
        let mut v = json!({
            "command": command,
            "seed": self.seed,
            "threads": self.threads,
            "out": self.out.as_ref().map(|p| p.display().to_string()),
        });
        if let (Some(obj), Some(more)) = (v.as_object_mut(), extra.as_object_mut()) {
            obj.append(more);
        }
        let text = serde_json::to_string(&v).map_err(|e| Error::Parse(e.to_string()))?;
        self.print(format!("config {text}"))
    }

    /// Writes to `--out` when given, otherwise to stdout.
    fn emit(&mut self, content: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, content).map_err(|e| Error::io(path, e)),
            None => {
                let text = content.strip_suffix('\n').unwrap_or(content);
                self.print(text)
            }
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Parse(e.to_string()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } => 2,
        _ => 1,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    let file: FileConfig = match &cli.config {
        Some(path) => read_json(path)?,
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads).unwrap_or(1);
    if threads == 0 {
        return Err(Error::Argument("--threads must be at least 1".into()));
    }
    let mut ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        threads,
        out: cli.out,
        file,
        stdout,
    };
    match cli.command {
        Command::LossEval(a) => loss_eval(&mut ctx, a),
        Command::GradCheck(a) => grad_check_cmd(&mut ctx, a),
        Command::ClipGen(a) => clip_gen(&mut ctx, a),
        Command::MergeCats(a) => merge_cats(&mut ctx, a),
        Command::Cost(a) => cost(&mut ctx, a),
        Command::Sample(a) => sample(&mut ctx, a),
        Command::ToyTrain(a) => toy_train(&mut ctx, a),
        Command::Ablate(a) => ablate(&mut ctx, a),
    }
}

struct LossInputs {
    logits: Tensor,
    lab: Option<Tensor>,
    box_mask: Option<Tensor>,
    tracks: Option<Vec<BoxTrack>>,
    target: Option<Tensor>,
    targets: Option<Vec<usize>>,
}

fn random_loss_inputs(kind: LossKind, rng: &mut RngStream) -> Result<LossInputs> {
    let dims = ClipDims::new(2, 8, 8);
    let uniform = |dims: &[usize], lo: f64, hi: f64, rng: &mut RngStream| -> Result<Tensor> {
        let mut t = Tensor::zeros(dims);
        for v in t.data_mut() {
            *v = rng.uniform(lo, hi)?;
        }
        Ok(t)
    };
    if kind == LossKind::Classification {
        let targets = (0..4).map(|_| rng.index(5)).collect::<Result<Vec<_>>>()?;
        return Ok(LossInputs {
            logits: uniform(&[4, 5], -3.0, 3.0, rng)?,
            lab: None,
            box_mask: None,
            tracks: None,
            target: None,
            targets: Some(targets),
        });
    }
    let logits = uniform(&dims.as_vec(), -3.0, 3.0, rng)?;
    let track = random_track(dims, rng)?;
    let mut lab = Tensor::zeros(&[dims.frames, dims.height, dims.width, 3]);
    for px in lab.data_mut().chunks_mut(3) {
        let light = if rng.index(2)? == 0 { 40.0 } else { 70.0 };
        px.copy_from_slice(&[light + rng.uniform(-1.0, 1.0)?, 0.0, 0.0]);
    }
    Ok(LossInputs {
        box_mask: Some(rasterize_box_mask(&track, dims)?),
        target: Some(uniform(&dims.as_vec(), 0.0, 1.0, rng)?),
        logits,
        lab: Some(lab),
        tracks: Some(vec![track]),
        targets: None,
    })
}

fn need<T>(v: Option<T>, flag: &str, kind: LossKind) -> Result<T> {
    v.ok_or_else(|| Error::Argument(format!("--{flag} is required for the {kind} loss")))
}

fn loss_eval(ctx: &mut Ctx, a: LossEvalArgs) -> Result<i32> {
    let mut pair = ctx.file.pair.unwrap_or_default();
    let mut stpa = ctx.file.stpa.unwrap_or_default();
    let blur = ctx.file.blur.unwrap_or_default();
    if let Some(v) = a.theta {
        pair.theta = v;
        stpa.theta = v;
    }
    if let Some(v) = a.tau_lab {
        pair.tau_lab = v;
        stpa.tau_lab = v;
    }
    if let Some(v) = a.w_corr {
        stpa.w_corr = v;
    }
    ctx.resolved(
        "loss-eval",
        json!({ "loss": a.loss, "pair": pair, "stpa": stpa, "blur": blur, "random_inputs": a.logits.is_none() }),
    )?;
    let inputs = match &a.logits {
        None => random_loss_inputs(a.loss, &mut RngStream::new(ctx.seed))?,
        Some(path) => LossInputs {
            logits: Tensor::read(path)?,
            lab: a.lab.as_deref().map(Tensor::read).transpose()?,
            box_mask: a.box_mask.as_deref().map(Tensor::read).transpose()?,
            tracks: a.boxes.as_deref().map(read_json).transpose()?,
            target: a.target.as_deref().map(Tensor::read).transpose()?,
            targets: a.targets.as_deref().map(read_json).transpose()?,
        },
    };
    let kind = a.loss;
    let z = &inputs.logits;
    let result: LossResult = match kind {
        LossKind::Projection => projection_loss(z, &need(inputs.box_mask, "box-mask", kind)?)?,
        LossKind::Pairwise => {
            let mask = need(inputs.box_mask, "box-mask", kind)?;
            let edges = spatial_pair_set(ClipDims::of(z)?, &mask)?;
            pairwise_affinity_loss(z, &need(inputs.lab, "lab", kind)?, &edges, &pair)?
        }
        LossKind::Stpa => {
            let lab = need(inputs.lab, "lab", kind)?;
            let tracks = need(inputs.tracks, "boxes", kind)?;
            let dims = ClipDims::of(z)?;
            let mut union = Tensor::zeros(&dims.as_vec());
            for t in &tracks {
                for (u, m) in union.data_mut().iter_mut().zip(rasterize_box_mask(t, dims)?.data()) {
                    *u = u.max(*m);
                }
            }
            let mut edges = spatial_pair_set(dims, &union)?;
            edges.extend(temporal_pair_set(dims, &tracks, &center_offsets(&tracks), &stpa)?);
            let feat = gaussian_blur_3d(&lab, &blur)?;
            stpa_loss(z, &lab, &feat, &edges, &stpa)?
        }
        LossKind::Tv3d => tv3d_loss(z)?,
        LossKind::BceDice => bce_dice_loss(z, &need(inputs.target, "target", kind)?)?,
        LossKind::Classification => classification_loss(z, &need(inputs.targets, "targets", kind)?)?,
    };
    ctx.print(format!("{kind} loss = {}", result.value))?;
    let body = to_json(&json!({ "loss": kind, "value": result.value, "grad": result.grad }))?;
    ctx.emit(&body)?;
    Ok(0)
}

fn grad_check_cmd(ctx: &mut Ctx, a: GradCheckArgs) -> Result<i32> {
    let kinds: Vec<LossKind> = if a.loss == "all" {
        LossKind::ALL.to_vec()
    } else {
        vec![a.loss.parse()?]
    };
    let points = a.points.or(ctx.file.points).unwrap_or(100);
    ctx.resolved("grad-check", json!({ "losses": kinds, "points": points }))?;
    let mut reports = Vec::new();
    for kind in kinds {
        let r = grad_check(kind, points, ctx.seed)?;
        ctx.print(format!(
            "{:<15} points={} max_rel_error={:.3e} {}",
            kind.name(),
            r.points,
            r.max_rel_error,
            if r.passed { "ok" } else { "FAILED" }
        ))?;
        reports.push(r);
    }
    ctx.emit(&to_json(&reports)?)?;
    Ok(if reports.iter().all(|r| r.passed) { 0 } else { 2 })
}

fn synthetic_image(rng: &mut RngStream) -> Result<(Tensor, Vec<ImageBox>)> {
    let (h, w) = (48, 64);
    let boxes = vec![
        ImageBox { instance_id: 1, x0: 6, y0: 8, x1: 30, y1: 30 },
        ImageBox { instance_id: 2, x0: 36, y0: 20, x1: 60, y1: 44 },
    ];
    let mut image = Tensor::zeros(&[h, w, 3]);
    for y in 0..h {
        for x in 0..w {
            let inside = boxes.iter().position(|b| x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1);
            let base = match inside {
                Some(0) => [0.9, 0.2, 0.2],
                Some(_) => [0.2, 0.3, 0.9],
                None => [0.5, 0.5, 0.5],
            };
            for (c, v) in base.iter().enumerate() {
                image.set(&[y, x, c], (v + rng.uniform(-0.05, 0.05)?).clamp(0.0, 1.0));
            }
        }
    }
    Ok((image, boxes))
}

fn clip_gen(ctx: &mut Ctx, a: ClipGenArgs) -> Result<i32> {
    let mut spec = ctx.file.aug.unwrap_or_default();
    let synthetic = a.image.is_none();
    if synthetic && ctx.file.aug.is_none() {
        // The default ranges target real photos; the built-in image is small.
        spec.resize_short_edge = [48, 64];
        spec.crop_short_edge = [32, 40];
    }
    if let Some(v) = a.frames {
        spec.frames = v;
    }
    if let Some(v) = a.resize {
        spec.resize_short_edge = [v[0], v[1]];
    }
    if let Some(v) = a.crop {
        spec.crop_short_edge = [v[0], v[1]];
    }
    if let Some(v) = a.rotation {
        spec.rotation_deg = [v[0], v[1]];
    }
    ctx.resolved("clip-gen", json!({ "aug": spec, "synthetic_image": synthetic }))?;
    let mut rng = RngStream::new(ctx.seed);
    let (image, boxes) = match a.image {
        Some(path) => {
            let boxes = match &a.boxes {
                Some(p) => read_json(p)?,
                None => Vec::new(),
            };
            (Tensor::read(path)?, boxes)
        }
        None => synthetic_image(&mut rng.fork(1))?,
    };
    let clip = augment_image_to_clip(&image, &boxes, &spec, &mut rng)?;
    for (t, f) in clip.frames.iter().enumerate() {
        let in_frame: Vec<String> = clip
            .tracks
            .iter()
            .filter_map(|tr| {
                tr.in_frame(t)
                    .map(|b| format!("#{}[{},{},{},{}]", tr.instance_id, b.x0, b.y0, b.x1, b.y1))
            })
            .collect();
        ctx.print(format!("frame {t}: {}x{} boxes {}", f.dims()[1], f.dims()[0], in_frame.join(" ")))?;
    }
    ctx.emit(&to_json(&clip)?)?;
    Ok(0)
}

fn merge_cats(ctx: &mut Ctx, a: MergeCatsArgs) -> Result<i32> {
    let taxonomies: Vec<Taxonomy> = match &a.taxonomies {
        Some(p) => read_json(p)?,
        None => vec![taxonomy::ytvis21(), taxonomy::ovis(), taxonomy::coco()],
    };
    let rules: Vec<CategoryMergeRule> = match &a.rules {
        Some(p) => read_json(p)?,
        None => taxonomy::default_rules(),
    };
    let names: Vec<&str> = taxonomies.iter().map(|t| t.name.as_str()).collect();
    ctx.resolved("merge-cats", json!({ "taxonomies": names, "rules": rules }))?;
    let merged = merge_category_maps(&taxonomies, &rules)?;
    ctx.print(format!("merged categories: {}", merged.len()))?;
    for (i, t) in taxonomies.iter().enumerate() {
        ctx.print(format!("{}: kept {} of {}", t.name, merged.kept(i), t.categories.len()))?;
    }
    ctx.emit(&to_json(&merged)?)?;
    Ok(0)
}

fn cost(ctx: &mut Ctx, a: CostArgs) -> Result<i32> {
    ctx.resolved(
        "cost",
        json!({ "objects": a.objects, "seconds_per_box": a.seconds_per_box, "seconds_per_mask": a.seconds_per_mask }),
    )?;
    let c = annotation_cost(a.objects, a.seconds_per_box, a.seconds_per_mask)?;
    ctx.print(format!("box annotation:  {:.1} worker days", c.box_days))?;
    ctx.print(format!("mask annotation: {:.1} worker days", c.mask_days))?;
    ctx.emit(&to_json(&c)?)?;
    Ok(0)
}

fn sample(ctx: &mut Ctx, a: SampleArgs) -> Result<i32> {
    ctx.resolved("sample", json!({ "manifest": a.manifest.display().to_string(), "draws": a.draws }))?;
    let manifest = DatasetManifest::read(&a.manifest)?;
    let draws = weighted_sample(&manifest, &mut RngStream::new(ctx.seed), a.draws)?;
    for (s, src) in manifest.sources.iter().enumerate() {
        let count = draws.iter().filter(|d| d.source == s).count();
        let freq = if draws.is_empty() { 0.0 } else { count as f64 / draws.len() as f64 };
        ctx.print(format!("{}: weight {} drawn {count} ({freq:.4})", src.name, src.weight))?;
    }
    let rows: Vec<Value> = draws
        .iter()
        .map(|d| {
            let src = &manifest.sources[d.source];
            json!({ "source": src.name, "item": src.items[d.item].id })
        })
        .collect();
    ctx.emit(&to_json(&rows)?)?;
    Ok(0)
}

fn train_config(ctx: &Ctx, flags: &TrainFlags) -> TrainConfig {
    let mut cfg = ctx.file.train.unwrap_or_default();
    if let Some(v) = flags.steps {
        cfg.steps = v;
    }
    if let Some(v) = flags.lr {
        cfg.lr = v;
    }
    if let Some(v) = flags.init_std {
        cfg.init_std = v;
    }
    cfg.seed = ctx.seed;
    cfg
}

fn toy_train(ctx: &mut Ctx, a: ToyTrainArgs) -> Result<i32> {
    let mut cfg = train_config(ctx, &a.train);
    if let Some(r) = a.recipe {
        cfg.recipe = r;
    }
    let spec: SceneSpec = match &a.scene {
        Some(p) => read_json(p)?,
        None => random_scene_spec(&mut RngStream::new(ctx.seed).fork(0))?,
    };
    ctx.resolved("toy-train", json!({ "train": cfg, "scene": spec }))?;
    let clip = generate_scene(&spec, &mut RngStream::new(ctx.seed))?;
    let out = optimize_masks(&clip, &cfg)?;
    let gt = clip.gt_masks.as_ref().expect("generated scenes carry masks");
    ctx.print(format!(
        "recipe {} initial loss {} final loss {} iou {}",
        cfg.recipe,
        out.log[0].total,
        out.final_loss(),
        clip_iou(&out.logits, gt)?
    ))?;
    ctx.emit(&out.log_csv()?)?;
    Ok(0)
}

fn ablate(ctx: &mut Ctx, a: AblateArgs) -> Result<i32> {
    let cfg = train_config(ctx, &a.train);
    let recipes = a.recipes.unwrap_or_else(|| Recipe::ALL.to_vec());
    let root = RngStream::new(ctx.seed);
    let scenes = (0..a.scenes)
        .map(|i| random_scene_spec(&mut root.fork(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    ctx.resolved(
        "ablate",
        json!({ "train": cfg, "scenes": a.scenes, "recipes": recipes, "seeds": a.seeds }),
    )?;
    let table = run_ablation(&scenes, &recipes, &a.seeds, &cfg, ctx.threads)?;
    for (recipe, iou, loss) in table.summary() {
        ctx.print(format!("{recipe:<16} mean iou {iou:.4} mean final loss {loss:.4}"))?;
    }
    ctx.emit(&table.to_csv()?)?;
    Ok(0)
}
