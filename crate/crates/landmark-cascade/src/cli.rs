//! `landmark-cascade <synth|train|predict|eval|augplan|pose>`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use landmark_cascade_core::cascade::train_cascade;
use landmark_cascade_core::headpose::significant_angle;
use landmark_cascade_core::metrics::{sorted_errors, DEFAULT_THRESHOLD};
use landmark_cascade_core::synth::generate_synthetic;
use landmark_cascade_core::{FeatureMode, Normalizer, SynthConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::write_png;
use crate::manifest::{base_dir, load_dataset, Entry, Manifest};
use crate::model3d::resolve_model3d;
use crate::model_file::{load_model, save_model};
use crate::pipeline::{
    build_plan, default_edges, estimate_pose, evaluate_dir, nca_pose_plan, predict_samples, AugSpec, Budget,
    CameraSpec,
};
use crate::pts::{read_pts, write_pts};
use crate::report::{
    write_csv, write_json, write_train_log, CedRow, HistogramRow, PoseRow, ReportRow, SortedRow,
};

#[derive(Debug, Parser)]
#[command(name = "landmark-cascade", version, about = "Cascaded shape regression for facial landmarks")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "LANDMARK_CASCADE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: PNG images, .pts files and manifest.json.
    Synth(SynthArgs),
    /// Train a cascade model.
    Train(TrainArgs),
    /// Predict landmarks for every sample of a manifest.
    Predict(PredictArgs),
    /// Score predictions: report.csv, ced.csv, sorted_errors.csv, summary.json.
    Eval(EvalArgs),
    /// Pose-balanced augmentation plan as CSV.
    Augplan(AugplanArgs),
    /// Head pose of every sample by POSIT, as CSV.
    Pose(PoseArgs),
}

#[derive(Debug, Args)]
pub struct CommonConfig {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonConfig,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    /// Image side in pixels.
    #[arg(long)]
    pub size: Option<u32>,
    /// 5, 8 or 68.
    #[arg(long)]
    pub landmarks: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonConfig,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output model, conventionally `*.cascade.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<FeatureMode>,
    /// uniform:M, nca:MIN,MAX,BUDGET (BUDGET may be e.g. 20N) or plan:FILE.
    #[arg(long)]
    pub aug: Option<String>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub ferns: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Training log CSV; defaults next to the model.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub pose: PoseModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonConfig,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonConfig,
    /// Directory of `<id>.pts` predictions.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// iod:LEFT,RIGHT or face.
    #[arg(long, value_parser = parse_normalizer)]
    pub normalizer: Option<Normalizer>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PoseModelArgs {
    /// face5, face68, sheep8 or a JSON file; defaults to the built-in layout matching the landmark count.
    #[arg(long)]
    pub model3d: Option<String>,
    #[arg(long)]
    pub focal: Option<f64>,
    #[arg(long)]
    pub cx: Option<f64>,
    #[arg(long)]
    pub cy: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AugplanArgs {
    #[command(flatten)]
    pub common: CommonConfig,
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub pose: PoseModelArgs,
    /// MIN,MAX initialisations per sample.
    #[arg(long, default_value = "11,40", value_parser = parse_bounds)]
    pub bounds: (u32, u32),
    /// Total initialisations, absolute or as a multiple of the sample count.
    #[arg(long, default_value = "20N")]
    pub budget: Budget,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PoseArgs {
    #[command(flatten)]
    pub common: CommonConfig,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Use predictions from this directory instead of the annotations.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[command(flatten)]
    pub pose: PoseModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// JSON configuration shared by all subcommands; flags take precedence.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub synth: Option<SynthConfig>,
    pub train: Option<TrainConfig>,
    pub aug: Option<String>,
    pub normalizer: Option<Normalizer>,
    pub threshold: Option<f64>,
    pub restarts: Option<usize>,
    pub model3d: Option<String>,
    pub camera: Option<CameraSpec>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn parse_mode(s: &str) -> std::result::Result<FeatureMode, String> {
    FeatureMode::parse(s).ok_or_else(|| format!("unknown feature mode {s:?} (tif, pair or offset)"))
}

fn parse_normalizer(s: &str) -> std::result::Result<Normalizer, String> {
    if s == "face" {
        return Ok(Normalizer::FaceSize);
    }
    let pair = s.strip_prefix("iod:").ok_or_else(|| format!("normalizer {s:?}: expected iod:LEFT,RIGHT or face"))?;
    let (l, r) = pair.split_once(',').ok_or("iod needs two indices")?;
    let idx = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad landmark index {v:?}"));
    Ok(Normalizer::Interocular(idx(l)?, idx(r)?))
}

fn parse_bounds(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let v = |x: &str| x.trim().parse::<u32>().map_err(|_| format!("bad bound {x:?}"));
    Ok((v(a)?, v(b)?))
}

fn camera(args: &PoseModelArgs, cfg: &RunConfig) -> CameraSpec {
    let base = cfg.camera.unwrap_or_default();
    CameraSpec { focal: args.focal.or(base.focal), cx: args.cx.or(base.cx), cy: args.cy.or(base.cy) }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Augplan(a) => augplan(a),
        Command::Pose(a) => pose(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg_file = RunConfig::load(a.common.config.as_deref())?;
    let mut cfg = cfg_file.synth.unwrap_or_default();
    if let Some(seed) = a.common.seed.or(cfg_file.seed) {
        cfg.seed = seed;
    }
    cfg.count = a.count.unwrap_or(cfg.count);
    cfg.image_size = a.size.unwrap_or(cfg.image_size);
    cfg.landmarks = a.landmarks.unwrap_or(cfg.landmarks);
    let samples = generate_synthetic(&cfg)?;

    for sub in ["images", "pts"] {
        create_dir(&a.out.join(sub))?;
    }
    let mut entries = Vec::with_capacity(samples.len());
    for s in &samples {
        let image = PathBuf::from("images").join(format!("{}.png", s.id));
        let pts = PathBuf::from("pts").join(format!("{}.pts", s.id));
        write_png(&a.out.join(&image), &s.image)?;
        write_pts(&a.out.join(&pts), s.truth()?)?;
        let b = s.bbox;
        entries.push(Entry { id: s.id.clone(), image, pts: Some(pts), bbox: [b.x, b.y, b.w, b.h], pose: s.pose });
    }
    let normalizer = match cfg.landmarks {
        5 => Normalizer::Interocular(0, 1),
        68 => Normalizer::Interocular(36, 45),
        _ => Normalizer::FaceSize,
    };
    let manifest = Manifest { landmarks: cfg.landmarks, normalizer: Some(normalizer), samples: entries };
    manifest.save(&a.out.join("manifest.json"))?;
    eprintln!("wrote {} samples to {}", samples.len(), a.out.display());
    Ok(())
}

fn default_log_path(model: &Path) -> PathBuf {
    let name = model.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".json").unwrap_or(&name);
    model.with_file_name(format!("{stem}.log.csv"))
}

fn train(a: TrainArgs) -> Result<()> {
    let run_cfg = RunConfig::load(a.common.config.as_deref())?;
    let mut cfg = run_cfg.train.unwrap_or_default();
    if let Some(seed) = a.common.seed.or(run_cfg.seed) {
        cfg.seed = seed;
    }
    cfg.mode = a.mode.unwrap_or(cfg.mode);
    cfg.stages = a.stages.unwrap_or(cfg.stages);
    cfg.ferns_per_stage = a.ferns.unwrap_or(cfg.ferns_per_stage);
    cfg.fern_depth = a.depth.unwrap_or(cfg.fern_depth);
    cfg.validate()?;
    let aug: AugSpec = a.aug.as_deref().or(run_cfg.aug.as_deref()).unwrap_or("uniform:20").parse()?;

    let (manifest, samples) = load_dataset(&a.manifest)?;
    if samples.iter().any(|s| s.truth.is_none()) {
        return Err(Error::Data("every training sample needs a .pts annotation".into()));
    }
    let model3d = match aug {
        AugSpec::Nca { .. } => {
            Some(resolve_model3d(a.pose.model3d.as_deref().or(run_cfg.model3d.as_deref()), manifest.landmarks)?)
        }
        _ => None,
    };
    let plan = build_plan(&aug, &samples, model3d.as_ref(), &camera(&a.pose, &run_cfg))?;
    eprintln!(
        "training {} cascade on {} samples, {} instances",
        cfg.mode.as_str(),
        samples.len(),
        plan.budget()
    );
    let (model, log) = train_cascade(&samples, &plan, &cfg)?;
    save_model(&a.out, &model)?;
    let log_path = a.log.unwrap_or_else(|| default_log_path(&a.out));
    write_train_log(&log_path, &log)?;
    if !log.is_non_increasing() {
        eprintln!("warning: mean training NME increased between stages, see {}", log_path.display());
    }
    let (first, last) = (log.stages[0].mean_nme, log.stages[log.stages.len() - 1].mean_nme);
    eprintln!("training NME {first:.4} -> {last:.4}; model written to {}", a.out.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let run_cfg = RunConfig::load(a.common.config.as_deref())?;
    let model = load_model(&a.model)?;
    let (manifest, samples) = load_dataset(&a.manifest)?;
    model.check_landmarks(manifest.landmarks)?;
    let restarts = a.restarts.or(run_cfg.restarts).unwrap_or(model.config().restarts);
    let seed = a.common.seed.or(run_cfg.seed).unwrap_or(0);
    let preds = predict_samples(&model, &samples, restarts, seed)?;
    create_dir(&a.out)?;
    for (s, shape) in samples.iter().zip(&preds.shapes) {
        write_pts(&a.out.join(format!("{}.pts", s.id)), shape)?;
    }
    let hash_path = a.out.join("init_hash.txt");
    fs::write(&hash_path, format!("{}\n", preds.init_hash)).map_err(Error::io(&hash_path))?;
    eprintln!("initialisation hash {}", preds.init_hash);
    eprintln!("wrote {} predictions to {}", preds.shapes.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    samples: usize,
    scored: usize,
    missing_or_invalid: usize,
    mean_nme: Option<f64>,
    threshold: f64,
    slr: f64,
    normalizer: Normalizer,
    failures_by_pose: Option<Vec<HistogramRow>>,
    manifest: &'a Path,
    predictions: &'a Path,
}

fn eval(a: EvalArgs) -> Result<()> {
    let run_cfg = RunConfig::load(a.common.config.as_deref())?;
    let manifest = Manifest::load(&a.manifest)?;
    let normalizer = a.normalizer.or(run_cfg.normalizer).unwrap_or_else(|| manifest.normalizer());
    let threshold = a.threshold.or(run_cfg.threshold).unwrap_or(DEFAULT_THRESHOLD);
    if !(threshold > 0.0) {
        return Err(Error::Config("threshold must be positive".into()));
    }
    let ev = evaluate_dir(&manifest, &base_dir(&a.manifest), &a.pred, normalizer, threshold)?;
    create_dir(&a.out)?;

    write_csv(
        &a.out.join("report.csv"),
        ev.samples.iter().map(|s| ReportRow::new(&s.id, s.nme, s.pose, threshold, &s.error)),
    )?;
    let r = &ev.report;
    write_csv(
        &a.out.join("ced.csv"),
        r.ced_grid.iter().zip(&r.ced).map(|(&threshold, &fraction)| CedRow { threshold, fraction }),
    )?;
    let scored: Vec<f64> = ev.samples.iter().filter_map(|s| s.nme).collect();
    write_csv(
        &a.out.join("sorted_errors.csv"),
        sorted_errors(&scored).into_iter().enumerate().map(|(rank, nme)| SortedRow { rank, nme }),
    )?;
    let edges = default_edges();
    let histogram = r.failures.as_ref().map(|counts| {
        counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&failures, w)| HistogramRow { angle_min: w[0], angle_max: w[1], failures })
            .collect::<Vec<_>>()
    });
    let summary = Summary {
        samples: ev.samples.len(),
        scored: scored.len(),
        missing_or_invalid: ev.samples.len() - scored.len(),
        mean_nme: ev.mean_nme_scored.is_finite().then_some(ev.mean_nme_scored),
        threshold,
        slr: r.slr,
        normalizer,
        failures_by_pose: histogram,
        manifest: &a.manifest,
        predictions: &a.pred,
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    eprintln!(
        "{} samples, mean NME {:.4}, SLR@{threshold} {:.3}",
        summary.samples, ev.mean_nme_scored, summary.slr
    );
    Ok(())
}

fn augplan(a: AugplanArgs) -> Result<()> {
    let run_cfg = RunConfig::load(a.common.config.as_deref())?;
    let (manifest, samples) = load_dataset(&a.manifest)?;
    let model3d = resolve_model3d(a.pose.model3d.as_deref().or(run_cfg.model3d.as_deref()), manifest.landmarks)?;
    let budget = a.budget.resolve(samples.len());
    let plan = nca_pose_plan(&samples, &model3d, &camera(&a.pose, &run_cfg), a.bounds, budget)?;
    write_csv(&a.out, plan.rows(&samples))?;
    eprintln!(
        "significant angle ~ N({:.3}, {:.3}); {} initialisations over {} samples",
        plan.fit.mu,
        plan.fit.sigma,
        plan.plan.budget(),
        samples.len()
    );
    Ok(())
}

fn pose(a: PoseArgs) -> Result<()> {
    let run_cfg = RunConfig::load(a.common.config.as_deref())?;
    let (manifest, samples) = load_dataset(&a.manifest)?;
    let model3d = resolve_model3d(a.pose.model3d.as_deref().or(run_cfg.model3d.as_deref()), manifest.landmarks)?;
    let cam = camera(&a.pose, &run_cfg);
    let mut rows = Vec::with_capacity(samples.len());
    for s in &samples {
        let shape = match &a.pred {
            Some(dir) => read_pts(&dir.join(format!("{}.pts", s.id)))?,
            None => s.truth()?.clone(),
        };
        let est = estimate_pose(&shape, s, &model3d, &cam)?;
        let e = est.angles;
        rows.push(PoseRow {
            id: &s.id,
            pitch: e.pitch,
            yaw: e.yaw,
            roll: e.roll,
            significant_angle: significant_angle(&e),
            converged: est.converged,
            iterations: est.iterations,
        });
    }
    write_csv(&a.out, rows)?;
    Ok(())
}
