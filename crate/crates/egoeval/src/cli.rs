//! Command-line interface: `synth`, `fit`, `eval`, and `collide`.
//!
//! Every command is deterministic given its inputs, flags, and seed. Exit
//! codes: 0 success, 2 usage or configuration error, 1 internal error. With
//! `--json-errors`, failures print one line of JSON to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egoeval_core::apeval::{
    breakdown, match_detections, BreakdownSpec, MatchConfig, MetricKind, PredRep,
};
use egoeval_core::collision::{collision_study, CollisionConfig, EgoDims};
use egoeval_core::contour::{convex_visible_contour, crop_points, CropConfig};
use egoeval_core::geom::{Boundary, Polygon2, Vec2};
use egoeval_core::scene::Scene;
use egoeval_core::starpoly::{fit, FitOptions, FitWeights};
use rayon::prelude::*;

use crate::jsonl::{load_scene, save_scene, SceneFileError};
use crate::manifest::{manifest_beside, manifest_in_dir, RunManifest};
use crate::report;
use crate::synth::{generate, SynthConfig, SynthError};

#[derive(Debug, Parser)]
#[command(name = "egoeval", version, about = "Egocentric detection metrics over scene files")]
pub struct Cli {
    /// Print failures as single-line JSON on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    /// Worker threads for per-frame/per-detection fan-out
    /// (default: available cores).
    #[arg(long, global = true, env = "EGOEVAL_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene file.
    Synth(SynthArgs),
    /// Attach contour polygons to every detection in a scene file.
    Fit(FitArgs),
    /// Average-precision evaluation; writes CSV reports.
    Eval(EvalArgs),
    /// Future-collision study; writes CSV reports.
    Collide(CollideArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of objects.
    #[arg(long, default_value_t = 10)]
    pub objects: usize,
    /// Number of frames.
    #[arg(long, default_value_t = 50)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Detection noise magnitude, meters; heading/size noise scale with it.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Fraction of objects that move.
    #[arg(long, default_value_t = 0.25)]
    pub moving_frac: f64,
    /// Ego forward speed, m/s.
    #[arg(long, default_value_t = 5.0)]
    pub speed: f64,
    /// Ego turn rate, rad/s (0 = straight).
    #[arg(long, default_value_t = 0.0)]
    pub yaw_rate: f64,
    /// Seconds between frames.
    #[arg(long, default_value_t = 0.1)]
    pub period: f64,
    /// Sample the full outline of every object instead of the ego-facing
    /// half.
    #[arg(long)]
    pub full_visibility: bool,
    /// Output scene file.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitRep {
    /// Star-shaped outline fit to the object's accumulated surface points.
    Starpoly,
    /// Convex hull of the current frame's points near the box.
    Cvc,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input scene file.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output scene file (input plus contours).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Contour representation to fit.
    #[arg(long, value_enum, default_value_t = FitRep::Starpoly)]
    pub rep: FitRep,
    /// Radial resolution of the star-shaped outline.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// Crop padding around each detection box, meters.
    #[arg(long, default_value_t = 0.3)]
    pub padding: f64,
    /// Iteration cap per fit.
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalRep {
    /// Detections enter as box footprints.
    Box,
    /// Detections enter as their attached contours.
    Contour,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    SdeAp,
    SdeApd,
    IouAp,
    IouApd,
}

impl MetricArg {
    fn kind(self) -> MetricKind {
        match self {
            MetricArg::SdeAp => MetricKind::SdeAp,
            MetricArg::SdeApd => MetricKind::SdeApd,
            MetricArg::IouAp => MetricKind::IouAp,
            MetricArg::IouApd => MetricKind::IouApd,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Input scene file.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Directory for ap_results.csv, pr_points.csv, and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalRep::Box)]
    pub rep: EvalRep,
    /// Metrics to evaluate.
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = [MetricArg::SdeAp, MetricArg::SdeApd, MetricArg::IouAp, MetricArg::IouApd])]
    pub metric: Vec<MetricArg>,
    /// True-positive error cutoffs for the shape criterion, meters.
    #[arg(long, value_delimiter = ',', default_values_t = [0.2])]
    pub delta: Vec<f64>,
    /// Weight exponents for the distance-weighted metrics.
    #[arg(long, value_delimiter = ',', default_values_t = [3.0])]
    pub beta: Vec<f64>,
    /// Future horizons, seconds.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
    pub t: Vec<f64>,
    /// Range bucket edges, meters; an all-ranges bucket is always included.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 5.0, 10.0, 20.0, 40.0])]
    pub buckets: Vec<f64>,
    /// True-positive IoU cutoff for the overlap criterion.
    #[arg(long, default_value_t = 0.7)]
    pub iou_threshold: f64,
}

#[derive(Debug, Args)]
pub struct CollideArgs {
    /// Input scene file.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Directory for collision_groups.csv, collision_temporal.csv, and
    /// manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Ego footprint length, meters.
    #[arg(long)]
    pub ego_length: f64,
    /// Ego footprint width, meters.
    #[arg(long)]
    pub ego_width: f64,
    /// Safety-margin scale on the ego footprint.
    #[arg(long, default_value_t = 1.8)]
    pub ego_scale: f64,
    /// Look-ahead horizon, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    /// Horizon step, seconds.
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = EvalRep::Box)]
    pub rep: EvalRep,
    /// True-positive error cutoff used when matching detections to objects.
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad configuration, or unusable input: exit code 2.
    Usage(String),
    /// Failure while computing or writing outputs: exit code 1.
    Internal(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> CliError {
        CliError::Usage(e.to_string())
    }

    fn internal(e: impl std::fmt::Display) -> CliError {
        CliError::Internal(e.to_string())
    }
}

impl From<SceneFileError> for CliError {
    fn from(e: SceneFileError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

/// Entry point: parse, run, and render any failure.
pub fn main_impl() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, message, code) = match &e {
                CliError::Usage(m) => ("usage", m, 2u8),
                CliError::Internal(m) => ("internal", m, 1u8),
            };
            if cli.json_errors {
                eprintln!("{}", serde_json::json!({ "error": message, "kind": kind }));
            } else {
                eprintln!("error: {message}");
            }
            ExitCode::from(code)
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be positive".to_string())),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(CliError::internal)?;
    let start = Instant::now();
    pool.install(|| match &cli.command {
        Command::Synth(args) => cmd_synth(args, start),
        Command::Fit(args) => cmd_fit(args, start),
        Command::Eval(args) => cmd_eval(args, start),
        Command::Collide(args) => cmd_collide(args, start),
    })
}

fn write_scene(scene: &Scene, path: &Path) -> Result<(), CliError> {
    save_scene(scene, path).map_err(CliError::internal)
}

fn finish_manifest(
    mut m: RunManifest,
    path: &Path,
    start: Instant,
) -> Result<(), CliError> {
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(path).map_err(CliError::internal)
}

fn cmd_synth(args: &SynthArgs, start: Instant) -> Result<(), CliError> {
    let cfg = SynthConfig {
        n_objects: args.objects,
        n_frames: args.frames,
        frame_period: args.period,
        ego_speed: args.speed,
        ego_yaw_rate: args.yaw_rate,
        moving_fraction: args.moving_frac,
        full_visibility: args.full_visibility,
        ..SynthConfig::default()
    }
    .with_noise(args.noise);
    let scene = generate(&cfg, args.seed)?;
    write_scene(&scene, &args.output)?;

    let manifest = RunManifest::new(
        "synth",
        serde_json::json!({
            "config": cfg,
            "output": args.output.display().to_string(),
        }),
    )
    .with_seed(args.seed);
    finish_manifest(manifest, &manifest_beside(&args.output), start)?;

    println!(
        "wrote {}: {} objects, {} frames, {} detections",
        args.output.display(),
        scene.objects.len(),
        scene.ego.len(),
        scene.detections.len()
    );
    Ok(())
}

/// Outcome tallies of a whole-scene contour fit.
#[derive(Debug, Clone, Copy)]
pub struct FitSummary {
    pub count: usize,
    /// Mean final coverage loss (star fits only; 0 for the hull contour).
    pub mean_coverage: f64,
    pub mean_iterations: f64,
    /// Detections that fell back to their box footprint.
    pub fallbacks: usize,
}

/// Attach a contour to every detection in the scene.
///
/// For the star outline, the coverage points are the matched object's
/// accumulated surface points placed at the detection's frame; detections
/// without a usable match fall back to the frame's visible points. Either
/// way the cloud is cropped to the padded detection box, and a cloud too
/// thin to fit falls back to the box footprint — a contour is always
/// attached.
pub fn fit_contours(
    scene: &mut Scene,
    rep: FitRep,
    crop: &CropConfig,
    opts: &FitOptions,
) -> Result<FitSummary, CliError> {
    if opts.resolution < 8 || !opts.resolution.is_multiple_of(8) {
        return Err(CliError::Usage("--resolution must be a multiple of 8, at least 8".into()));
    }

    // One matched-object lookup per detection (by global index).
    let mut matched_obj = vec![None; scene.detections.len()];
    if rep == FitRep::Starpoly {
        let match_cfg = MatchConfig::default();
        for f in 0..scene.n_frames() {
            let records = match_detections(scene, f, &match_cfg, PredRep::BoxFootprint, 0.0)
                .map_err(CliError::usage)?;
            for r in records {
                matched_obj[r.det_index] = r.matched.map(|m| m.object_index);
            }
        }
    }

    struct FitLog {
        contour: Polygon2,
        coverage: f64,
        iterations: usize,
        fell_back: bool,
    }

    let weights = FitWeights::default();
    let shared: &Scene = scene;
    let logs: Vec<FitLog> = shared
        .detections
        .par_iter()
        .enumerate()
        .map(|(di, det)| {
            let f = det.frame_index;
            match rep {
                FitRep::Starpoly => {
                    let mut pts: Vec<Vec2> = Vec::new();
                    if let Some(oi) = matched_obj[di] {
                        if let Some(Boundary::Points(agg)) = shared.objects[oi].boundary_at(f) {
                            pts = crop_points(&det.bbox, &agg, crop);
                        }
                    }
                    if pts.is_empty() {
                        pts = crop_points(&det.bbox, &shared.frame_points(f), crop);
                    }
                    let outcome = fit(&det.bbox, &pts, &weights, opts);
                    FitLog {
                        contour: outcome.polygon,
                        coverage: outcome.final_loss.coverage,
                        iterations: outcome.iterations,
                        fell_back: outcome.fell_back,
                    }
                }
                FitRep::Cvc => match convex_visible_contour(
                    &det.bbox,
                    &shared.frame_points(f),
                    crop,
                ) {
                    Ok(contour) => FitLog { contour, coverage: 0.0, iterations: 0, fell_back: false },
                    Err(_) => FitLog {
                        contour: det.bbox.footprint(),
                        coverage: 0.0,
                        iterations: 0,
                        fell_back: true,
                    },
                },
            }
        })
        .collect();

    let n = logs.len();
    let fallbacks = logs.iter().filter(|l| l.fell_back).count();
    let mean_coverage =
        if n > 0 { logs.iter().map(|l| l.coverage).sum::<f64>() / n as f64 } else { 0.0 };
    let mean_iterations =
        if n > 0 { logs.iter().map(|l| l.iterations).sum::<usize>() as f64 / n as f64 } else { 0.0 };
    for (det, log) in scene.detections.iter_mut().zip(logs) {
        det.contour = Some(log.contour);
    }
    Ok(FitSummary { count: n, mean_coverage, mean_iterations, fallbacks })
}

fn cmd_fit(args: &FitArgs, start: Instant) -> Result<(), CliError> {
    let mut scene = load_scene(&args.input)?;
    let crop = CropConfig { padding: args.padding };
    let opts = FitOptions {
        resolution: args.resolution,
        max_iters: args.max_iters,
        ..FitOptions::default()
    };
    let summary = fit_contours(&mut scene, args.rep, &crop, &opts)?;

    write_scene(&scene, &args.output)?;
    let manifest = RunManifest::new(
        "fit",
        serde_json::json!({
            "input": args.input.display().to_string(),
            "output": args.output.display().to_string(),
            "rep": format!("{:?}", args.rep).to_lowercase(),
            "resolution": args.resolution,
            "padding": args.padding,
            "max_iters": args.max_iters,
        }),
    )
    .with_input(&args.input)
    .map_err(CliError::internal)?;
    finish_manifest(manifest, &manifest_beside(&args.output), start)?;

    match args.rep {
        FitRep::Starpoly => println!(
            "fit {} contours: mean coverage loss {:.3e}, mean iterations {:.1}, box fallbacks {}",
            summary.count, summary.mean_coverage, summary.mean_iterations, summary.fallbacks
        ),
        FitRep::Cvc => println!(
            "fit {} contours: box fallbacks {}",
            summary.count, summary.fallbacks
        ),
    }
    Ok(())
}

fn parse_buckets(edges: &[f64]) -> Result<Vec<(f64, f64)>, CliError> {
    if edges.len() < 2 {
        return Err(CliError::Usage("--buckets needs at least two edges".into()));
    }
    let mut out = vec![(0.0, f64::INFINITY)];
    for w in edges.windows(2) {
        // partial_cmp keeps NaN edges out as well
        if w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less) {
            return Err(CliError::Usage("--buckets edges must be strictly increasing".into()));
        }
        out.push((w[0], w[1]));
    }
    Ok(out)
}

fn eval_rep(rep: EvalRep) -> PredRep {
    match rep {
        EvalRep::Box => PredRep::BoxFootprint,
        EvalRep::Contour => PredRep::Contour,
    }
}

fn cmd_eval(args: &EvalArgs, start: Instant) -> Result<(), CliError> {
    let scene = load_scene(&args.input)?;
    let rep = eval_rep(args.rep);
    let cfg = MatchConfig { iou_threshold: args.iou_threshold, ..MatchConfig::default() };
    let spec = BreakdownSpec {
        metrics: args.metric.iter().map(|m| m.kind()).collect(),
        buckets: parse_buckets(&args.buckets)?,
        t_values: args.t.clone(),
        sde_thresholds: args.delta.clone(),
        exponents: args.beta.clone(),
    };

    // Horizons are independent; fan out per t and keep the t order.
    let per_t: Vec<_> = spec
        .t_values
        .par_iter()
        .map(|&t| breakdown(&scene, &cfg, rep, &BreakdownSpec { t_values: vec![t], ..spec.clone() }))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::usage)?;
    let rows: Vec<_> = per_t.into_iter().flatten().collect();

    std::fs::create_dir_all(&args.out_dir).map_err(CliError::internal)?;
    report::write_ap_results(&args.out_dir.join("ap_results.csv"), &rows)
        .map_err(CliError::internal)?;
    report::write_pr_points(&args.out_dir.join("pr_points.csv"), &rows)
        .map_err(CliError::internal)?;

    let manifest = RunManifest::new(
        "eval",
        serde_json::json!({
            "input": args.input.display().to_string(),
            "out_dir": args.out_dir.display().to_string(),
            "rep": format!("{:?}", args.rep).to_lowercase(),
            "metric": args.metric.iter().map(|m| m.kind().as_str()).collect::<Vec<_>>(),
            "delta": args.delta,
            "beta": args.beta,
            "t": args.t,
            "buckets": args.buckets,
            "iou_threshold": args.iou_threshold,
        }),
    )
    .with_input(&args.input)
    .map_err(CliError::internal)?;
    finish_manifest(manifest, &manifest_in_dir(&args.out_dir), start)?;

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.key.metric.as_str().to_string(),
                format!("{}-{}", r.key.bucket.0, if r.key.bucket.1.is_finite() {
                    format!("{}", r.key.bucket.1)
                } else {
                    "inf".to_string()
                }),
                format!("{}", r.key.t),
                format!("{}", r.key.threshold),
                r.key.exponent.map(|b| format!("{b}")).unwrap_or_default(),
                if r.result.defined { format!("{:.6}", r.result.ap) } else { "undefined".to_string() },
            ]
        })
        .collect();
    let mut stdout = std::io::stdout().lock();
    report::text_table(&["metric", "bucket", "t", "delta", "beta", "ap"], &table, &mut stdout)
        .map_err(CliError::internal)?;
    let undefined = rows.iter().filter(|r| !r.result.defined).count();
    if undefined > 0 {
        println!("{undefined} cells undefined (no ground truth in range)");
    }
    Ok(())
}

fn cmd_collide(args: &CollideArgs, start: Instant) -> Result<(), CliError> {
    let scene = load_scene(&args.input)?;
    let dims = EgoDims { length: args.ego_length, width: args.ego_width };
    let cfg = CollisionConfig { ego_scale: args.ego_scale, horizon: args.horizon, step: args.step };
    let match_cfg = MatchConfig { sde_threshold: args.delta, ..MatchConfig::default() };
    let study = collision_study(&scene, eval_rep(args.rep), &dims, &cfg, &match_cfg)
        .map_err(CliError::usage)?;

    std::fs::create_dir_all(&args.out_dir).map_err(CliError::internal)?;
    report::write_collision_groups(&args.out_dir.join("collision_groups.csv"), &study)
        .map_err(CliError::internal)?;
    report::write_collision_temporal(&args.out_dir.join("collision_temporal.csv"), &study)
        .map_err(CliError::internal)?;

    let manifest = RunManifest::new(
        "collide",
        serde_json::json!({
            "input": args.input.display().to_string(),
            "out_dir": args.out_dir.display().to_string(),
            "ego_length": args.ego_length,
            "ego_width": args.ego_width,
            "ego_scale": args.ego_scale,
            "horizon": args.horizon,
            "step": args.step,
            "rep": format!("{:?}", args.rep).to_lowercase(),
            "delta": args.delta,
        }),
    )
    .with_input(&args.input)
    .map_err(CliError::internal)?;
    finish_manifest(manifest, &manifest_in_dir(&args.out_dir), start)?;

    let table: Vec<Vec<String>> = study
        .temporal
        .iter()
        .map(|p| {
            vec![
                format!("{}", p.t),
                p.cda.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".to_string()),
                p.mean_iou.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".to_string()),
                p.mean_sde.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".to_string()),
                format!("{}", p.tp),
                format!("{}", p.fp),
                format!("{}", p.missed),
            ]
        })
        .collect();
    let mut stdout = std::io::stdout().lock();
    report::text_table(
        &["t", "cda", "mean_iou", "mean_sde", "tp", "fp", "missed"],
        &table,
        &mut stdout,
    )
    .map_err(CliError::internal)?;
    println!(
        "unmatched detections: {}; unpaired events: {}; horizon cells skipped: {}",
        study.unmatched_detections, study.unpaired_gt_events, study.horizon_skipped
    );
    Ok(())
}
