//! Command-line interface.
//!
//! Every subcommand reads an optional JSON [`RunConfig`], applies command-line
//! overrides, validates inputs, and writes the merged configuration to
//! `config.json` in its output directory before doing any work.
//!
//! Exit codes: 0 on success, 1 when arguments, configuration or inputs are
//! invalid, 2 when a computation or output write fails.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::geometry::{
    add_gaussian_noise, cut_holes, fit_normalization, make_partial, normalize_episode, PointCloud,
};
use crate::inference::{predict_future, write_correspondence_csv, Correspondence, InferConfig};
use crate::io_formats::{
    load_checkpoint, load_cloud_auto, latent_records, read_dataset, save_checkpoint, save_cloud,
    write_dataset, CloudFormat, TrainingMetadata,
};
use crate::metrics::{
    correspondence_l2, cumulative_matching_accuracy, default_thresholds, eval_chamfer, write_cma_csv,
    CmaCurve,
};
use crate::morpher::{gradient_check, init_net, GradCheckConfig, GradCheckReport};
use crate::rng::{derive_seed, standard_normal_vec};
use crate::synth::{gen_random_dataset, FamilyRanges, MotionKind};
use crate::training::{flow_chamfer_loss, train_with_progress, write_loss_csv, TrainConfig};
use crate::{Error, Point3, Real};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const CONFIG_ECHO: &str = "config.json";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_INVALID,
        message: e.to_string(),
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    }
}

/// Input-side failures (bad flags, missing or malformed files) are validation
/// errors; anything else is a runtime failure.
fn classify(e: Error) -> CliError {
    match e {
        Error::DegenerateInput(_) => runtime(e),
        _ => invalid(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub families: Vec<MotionKind>,
    pub episodes_per_family: usize,
    pub n_points: usize,
    pub ranges: FamilyRanges,
    pub seed: u64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            families: vec![MotionKind::RigidRotation],
            episodes_per_family: 10,
            n_points: 512,
            ranges: FamilyRanges::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptSettings {
    pub noise_sigma: Real,
    pub holes: usize,
    pub hole_radius: Real,
    /// Fraction of points cut away by a random plane; 0 disables.
    pub partial_fraction: Real,
    pub seed: u64,
}

impl Default for CorruptSettings {
    fn default() -> Self {
        CorruptSettings {
            noise_sigma: 0.0,
            holes: 0,
            hole_radius: 0.1,
            partial_fraction: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSettings {
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub n_points: usize,
    pub h: Real,
    pub tol: Real,
    pub seed: u64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        GradcheckSettings {
            latent_dim: 4,
            hidden_dims: vec![8, 8],
            n_points: 32,
            h: 1e-6,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub previous: Option<PathBuf>,
    pub current: Option<PathBuf>,
    pub prediction: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
}

/// Complete settings of one run, loadable from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub infer: InferConfig,
    pub synth: SynthSettings,
    pub corrupt: CorruptSettings,
    pub gradcheck: GradcheckSettings,
    pub paths: Paths,
}

impl RunConfig {
    fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.infer.seed = seed;
        self.synth.seed = seed;
        self.corrupt.seed = seed;
        self.gradcheck.seed = seed;
    }
}

#[derive(Debug, Parser)]
#[command(name = "flowmorph", version, about = "Continuous motion flow for point cloud sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with ground-truth flows.
    Synth(SynthArgs),
    /// Train the decoder and per-pair latents on a dataset.
    Train(TrainArgs),
    /// Predict the next frame from two consecutive clouds.
    Predict(PredictArgs),
    /// Score a predicted cloud against ground truth.
    Eval(EvalArgs),
    /// Add noise, holes or a planar cut to clouds.
    Corrupt(CorruptArgs),
    /// Compare analytic and finite-difference gradients on a fresh net.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Motion families, comma separated (rigid_rotation, bending_sheet, articulated_hinge).
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub n_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr_theta: Option<Real>,
    #[arg(long)]
    pub lr_z: Option<Real>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub n_points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub lambda_z: Option<Real>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Older observed frame.
    #[arg(long)]
    pub previous: Option<PathBuf>,
    /// Newer observed frame; the prediction moves its points.
    #[arg(long)]
    pub current: Option<PathBuf>,
    /// Expected latent size; must match the checkpoint.
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub lr_z: Option<Real>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub n_points: Option<usize>,
    /// Format of the predicted cloud (xyz, ply or obj).
    #[arg(long, default_value = "xyz")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub prediction: Option<PathBuf>,
    /// Ground-truth cloud, index-aligned with the prediction.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Clouds to corrupt; results keep their file names inside `--out`.
    #[arg(long = "input", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub noise_sigma: Option<Real>,
    #[arg(long)]
    pub holes: Option<usize>,
    #[arg(long)]
    pub hole_radius: Option<Real>,
    #[arg(long)]
    pub partial_fraction: Option<Real>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub n_points: Option<usize>,
    #[arg(long)]
    pub tol: Option<Real>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Corrupt(a) => cmd_corrupt(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Loaded config plus the raw JSON, so callers can tell which keys were set.
fn load_config(common: &CommonArgs) -> CliResult<(RunConfig, serde_json::Value)> {
    let (mut cfg, raw) = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| invalid(Error::io(path, e)))?;
            let raw: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let cfg: RunConfig = serde_json::from_value(raw.clone())
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            (cfg, raw)
        }
        None => (RunConfig::default(), serde_json::Value::Null),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.paths.out_dir = Some(out.clone());
    }
    Ok((cfg, raw))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    p.as_ref().ok_or_else(|| invalid(format!("missing required --{flag}")))
}

fn require_file(p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("{}: no such file", p.display())))
    }
}

fn prepare_out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let out = required(&cfg.paths.out_dir, "out")?.clone();
    fs::create_dir_all(&out).map_err(|e| invalid(Error::io(&out, e)))?;
    let text = serde_json::to_string_pretty(cfg).map_err(runtime)?;
    let path = out.join(CONFIG_ECHO);
    fs::write(&path, text).map_err(|e| runtime(Error::io(&path, e)))?;
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    fs::write(path, text).map_err(|e| runtime(Error::io(path, e)))
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let (mut cfg, _) = load_config(&args.common)?;
    if let Some(names) = &args.families {
        cfg.synth.families = names
            .iter()
            .map(|s| MotionKind::parse(s.trim()))
            .collect::<crate::Result<_>>()
            .map_err(invalid)?;
    }
    if let Some(n) = args.episodes {
        cfg.synth.episodes_per_family = n;
    }
    if let Some(n) = args.n_points {
        cfg.synth.n_points = n;
    }
    let s = &cfg.synth;
    if s.families.is_empty() || s.episodes_per_family == 0 {
        return Err(invalid("synth needs at least one family and one episode"));
    }
    let out = prepare_out_dir(&cfg)?;
    let s = &cfg.synth;
    let mut episodes = Vec::new();
    for kind in &s.families {
        let seed = derive_seed(s.seed, kind.name(), 0);
        let eps = gen_random_dataset(*kind, &s.ranges, s.episodes_per_family, s.n_points, seed)
            .map_err(classify)?;
        episodes.extend(eps);
    }
    write_dataset(&episodes, &out).map_err(runtime)?;
    println!("wrote {} episodes to {}", episodes.len(), out.display());
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let (mut cfg, _) = load_config(&args.common)?;
    if let Some(d) = &args.data {
        cfg.paths.data_dir = Some(d.clone());
    }
    let t = &mut cfg.train;
    if let Some(v) = args.steps {
        t.steps = v;
    }
    if let Some(v) = args.lr_theta {
        t.lr_theta = v;
    }
    if let Some(v) = args.lr_z {
        t.lr_z = v;
    }
    if let Some(v) = args.latent_dim {
        t.latent_dim = v;
    }
    if let Some(v) = args.n_points {
        t.n_points = v;
    }
    if let Some(v) = &args.hidden_dims {
        t.hidden_dims = v.clone();
    }
    if let Some(v) = args.lambda_z {
        t.lambda_z = v;
    }
    cfg.train.validate().map_err(invalid)?;
    let data_dir = required(&cfg.paths.data_dir, "data")?.clone();
    let dataset = read_dataset(&data_dir).map_err(invalid)?;
    if dataset.is_empty() {
        return Err(invalid(format!("{}: dataset has no episodes", data_dir.display())));
    }
    let normalized = dataset
        .iter()
        .map(|ep| normalize_episode(ep).map(|(e, _)| e))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(invalid)?;
    let out = prepare_out_dir(&cfg)?;

    let outcome = train_with_progress(&normalized, &cfg.train, |step, loss| {
        if step % 100 == 0 {
            println!("{step},{loss}");
        }
    })
    .map_err(runtime)?;
    let meta = TrainingMetadata {
        steps: cfg.train.steps,
        seed: cfg.train.seed,
        loss: outcome.loss_history.last().copied(),
    };
    save_checkpoint(
        &outcome.net,
        &latent_records(&outcome.latents),
        meta,
        &out.join("checkpoint.json"),
    )
    .map_err(runtime)?;
    write_loss_csv(&out.join("loss.csv"), &outcome.loss_history).map_err(runtime)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PredictionSummary<'a> {
    fit_loss: Real,
    iterations: usize,
    z_hat: &'a [Real],
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let (mut cfg, raw) = load_config(&args.common)?;
    for (src, dst) in [
        (&args.checkpoint, &mut cfg.paths.checkpoint),
        (&args.previous, &mut cfg.paths.previous),
        (&args.current, &mut cfg.paths.current),
    ] {
        if let Some(p) = src {
            *dst = Some(p.clone());
        }
    }
    if let Some(v) = args.lr_z {
        cfg.infer.lr_z = v;
    }
    if let Some(v) = args.max_iters {
        cfg.infer.max_iters = v;
    }
    if let Some(v) = args.n_points {
        cfg.infer.n_points = v;
    }
    let requested_latent = args.latent_dim.or_else(|| {
        raw.get("train")
            .and_then(|t| t.get("latent_dim"))
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
    });
    if let Some(v) = requested_latent {
        cfg.train.latent_dim = v;
    }
    cfg.infer.validate().map_err(invalid)?;
    let format = CloudFormat::parse(&args.format).map_err(invalid)?;

    let ck_path = required(&cfg.paths.checkpoint, "checkpoint")?.clone();
    let prev_path = required(&cfg.paths.previous, "previous")?.clone();
    let curr_path = required(&cfg.paths.current, "current")?.clone();
    for p in [&ck_path, &prev_path, &curr_path] {
        require_file(p)?;
    }
    let (net, _, _) = load_checkpoint(&ck_path).map_err(invalid)?;
    if let Some(v) = requested_latent {
        if v != net.latent_dim() {
            return Err(invalid(format!(
                "requested latent_dim {v} does not match checkpoint latent_dim {}",
                net.latent_dim()
            )));
        }
    } else {
        cfg.train.latent_dim = net.latent_dim();
    }
    let previous = load_cloud_auto(&prev_path).map_err(invalid)?;
    let current = load_cloud_auto(&curr_path).map_err(invalid)?;
    previous.require_non_empty("previous frame").map_err(invalid)?;
    current.require_non_empty("current frame").map_err(invalid)?;
    let out = prepare_out_dir(&cfg)?;

    let t = fit_normalization(&previous).map_err(invalid)?;
    let result = predict_future(&net, &t.apply(&previous), &t.apply(&current), &cfg.infer)
        .map_err(runtime)?;
    let predicted = t.invert(&result.predicted_frame);
    let correspondence: Vec<Correspondence> = result
        .correspondence
        .iter()
        .map(|c| Correspondence {
            src_index: c.src_index,
            position: t.invert_point(c.position),
        })
        .collect();
    let ext = match format {
        CloudFormat::Xyz => "xyz",
        CloudFormat::Ply => "ply",
        CloudFormat::Obj => "obj",
    };
    save_cloud(&predicted, &out.join(format!("predicted.{ext}")), format).map_err(runtime)?;
    write_correspondence_csv(&out.join("correspondence.csv"), &correspondence).map_err(runtime)?;
    write_loss_csv(&out.join("loss.csv"), &result.loss_history).map_err(runtime)?;
    write_json(
        &out.join("prediction.json"),
        &PredictionSummary {
            fit_loss: result.fit_loss,
            iterations: result.loss_history.len(),
            z_hat: &result.z_hat,
        },
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Metrics {
    chamfer: Real,
    correspondence_l2: Real,
    cma_at_0_1: Option<Real>,
    cma: CmaCurve,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let (mut cfg, _) = load_config(&args.common)?;
    if let Some(p) = &args.prediction {
        cfg.paths.prediction = Some(p.clone());
    }
    if let Some(p) = &args.ground_truth {
        cfg.paths.ground_truth = Some(p.clone());
    }
    let pred_path = required(&cfg.paths.prediction, "prediction")?.clone();
    let gt_path = required(&cfg.paths.ground_truth, "ground-truth")?.clone();
    require_file(&pred_path)?;
    require_file(&gt_path)?;
    let pred = load_cloud_auto(&pred_path).map_err(invalid)?;
    let gt = load_cloud_auto(&gt_path).map_err(invalid)?;
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(invalid(format!(
            "prediction has {} points and ground truth has {}; both must be equal and non-empty",
            pred.len(),
            gt.len()
        )));
    }
    let out = prepare_out_dir(&cfg)?;

    let cma = cumulative_matching_accuracy(&pred, &gt, &default_thresholds()).map_err(runtime)?;
    let metrics = Metrics {
        chamfer: eval_chamfer(&pred, &gt).map_err(runtime)?,
        correspondence_l2: correspondence_l2(&pred, &gt).map_err(runtime)?,
        cma_at_0_1: cma.accuracy_at(0.1),
        cma,
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    write_cma_csv(&out.join("cma.csv"), &metrics.cma).map_err(runtime)?;
    println!(
        "chamfer {} correspondence_l2 {}",
        metrics.chamfer, metrics.correspondence_l2
    );
    Ok(())
}

fn corrupt_cloud(cloud: &PointCloud, s: &CorruptSettings, index: u64) -> crate::Result<PointCloud> {
    let mut c = cloud.clone();
    if s.partial_fraction > 0.0 {
        c = make_partial(&c, s.partial_fraction, derive_seed(s.seed, "partial", index))?;
    }
    if s.holes > 0 {
        c = cut_holes(&c, s.holes, s.hole_radius, derive_seed(s.seed, "holes", index))?;
    }
    add_gaussian_noise(&c, s.noise_sigma, derive_seed(s.seed, "noise", index))
}

pub fn cmd_corrupt(args: &CorruptArgs) -> CliResult<()> {
    let (mut cfg, _) = load_config(&args.common)?;
    if !args.inputs.is_empty() {
        cfg.paths.inputs = args.inputs.clone();
    }
    let s = &mut cfg.corrupt;
    if let Some(v) = args.noise_sigma {
        s.noise_sigma = v;
    }
    if let Some(v) = args.holes {
        s.holes = v;
    }
    if let Some(v) = args.hole_radius {
        s.hole_radius = v;
    }
    if let Some(v) = args.partial_fraction {
        s.partial_fraction = v;
    }
    let s = &cfg.corrupt;
    if !(s.noise_sigma >= 0.0 && s.noise_sigma.is_finite()) {
        return Err(invalid(format!("noise sigma must be finite and >= 0, got {}", s.noise_sigma)));
    }
    if !(s.partial_fraction >= 0.0 && s.partial_fraction < 1.0) {
        return Err(invalid(format!("partial fraction must lie in [0,1), got {}", s.partial_fraction)));
    }
    if s.holes > 0 && !(s.hole_radius > 0.0) {
        return Err(invalid(format!("hole radius must be > 0, got {}", s.hole_radius)));
    }
    if cfg.paths.inputs.is_empty() {
        return Err(invalid("missing required --input"));
    }
    let out_dir = required(&cfg.paths.out_dir, "out")?.clone();
    let mut jobs = Vec::new();
    for input in &cfg.paths.inputs {
        require_file(input)?;
        let format = CloudFormat::from_path(input).map_err(invalid)?;
        let name = input
            .file_name()
            .ok_or_else(|| invalid(format!("{}: not a file path", input.display())))?;
        let dest = out_dir.join(name);
        if dest.exists() && fs::canonicalize(&dest).ok() == fs::canonicalize(input).ok() {
            return Err(invalid(format!("{}: output would overwrite the input", input.display())));
        }
        let cloud = load_cloud_auto(input).map_err(invalid)?;
        jobs.push((cloud, dest, format));
    }
    prepare_out_dir(&cfg)?;
    for (i, (cloud, dest, format)) in jobs.iter().enumerate() {
        let c = corrupt_cloud(cloud, &cfg.corrupt, i as u64).map_err(runtime)?;
        save_cloud(&c, dest, *format).map_err(runtime)?;
        println!("{}: {} -> {} points", dest.display(), cloud.len(), c.len());
    }
    Ok(())
}

fn gaussian_cloud(n: usize, seed: u64, scale: Real) -> crate::Result<PointCloud> {
    let v = standard_normal_vec(seed, 3 * n);
    PointCloud::new(
        v.chunks(3).map(|c| Point3::new(c[0], c[1], c[2]) * scale).collect(),
        0,
    )
}

/// Gradient check of a freshly initialized net through the Chamfer loss
/// against a random target cloud.
pub fn run_gradcheck(s: &GradcheckSettings) -> crate::Result<GradCheckReport> {
    let net = init_net(s.latent_dim, &s.hidden_dims, derive_seed(s.seed, "gradcheck-net", 0))?;
    let points = gaussian_cloud(s.n_points, derive_seed(s.seed, "gradcheck-source", 0), 0.5)?;
    let target = gaussian_cloud(s.n_points, derive_seed(s.seed, "gradcheck-target", 0), 0.5)?;
    let z = standard_normal_vec(derive_seed(s.seed, "gradcheck-latent", 0), s.latent_dim);
    let loss = |flow: &crate::FlowField| flow_chamfer_loss(&points, &target, flow);
    let config = GradCheckConfig {
        h: s.h,
        tol: s.tol,
        seed: derive_seed(s.seed, "gradcheck-sample", 0),
        ..GradCheckConfig::default()
    };
    gradient_check(&net, &points, &z, &loss, &config)
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> CliResult<()> {
    let (mut cfg, _) = load_config(&args.common)?;
    let g = &mut cfg.gradcheck;
    if let Some(v) = args.latent_dim {
        g.latent_dim = v;
    }
    if let Some(v) = &args.hidden_dims {
        g.hidden_dims = v.clone();
    }
    if let Some(v) = args.n_points {
        g.n_points = v;
    }
    if let Some(v) = args.tol {
        g.tol = v;
    }
    let g = &cfg.gradcheck;
    if g.latent_dim == 0 || g.n_points == 0 || g.hidden_dims.is_empty() || g.hidden_dims.contains(&0) {
        return Err(invalid("latent_dim, n_points and hidden_dims must be positive"));
    }
    if !(g.h > 0.0) || !(g.tol >= 0.0) {
        return Err(invalid("h must be > 0 and tol >= 0"));
    }
    if cfg.paths.out_dir.is_some() {
        prepare_out_dir(&cfg)?;
    }
    let report = run_gradcheck(&cfg.gradcheck).map_err(runtime)?;
    if let Some(out) = &cfg.paths.out_dir {
        write_json(&out.join("gradcheck.json"), &report)?;
    }
    println!(
        "max relative error {:e} over {} parameters and {} latent entries (tol {:e})",
        report.max_rel_error, report.params_checked, report.latent_checked, report.tol
    );
    if report.passed {
        Ok(())
    } else {
        Err(runtime(format!(
            "gradient check failed: max relative error {:e} exceeds {:e}",
            report.max_rel_error, report.tol
        )))
    }
}
