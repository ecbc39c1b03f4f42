//! Command-line surface: `simulate → fit → eval`, plus `gradcheck` and `bench`.
//!
//! The binary is a thin wrapper around [`run`]; every command is also callable
//! as a library function.

pub mod bench;
pub mod config;
pub mod gradcheck;
pub mod io;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::estimation::{fit_scene, CameraId, Detection, EstimationError, ObjectId, SolverOptions};
use crate::metrics::{evaluate, EvalResult, DEFAULT_IOU_SAMPLES};
use crate::simulation::{corrupt_uncertainties, generate_scene, render_detections, UncertaintyMode};

pub use bench::{derive_seed, run_bench, BenchTable, Cell, Metric, TrialRecord};
pub use config::{ExperimentConfig, Method, ViewFraction};
pub use gradcheck::{default_kernels, run_gradcheck, GradKernel, KernelReport};
pub use io::{read_detections, read_results, read_scene, write_json, write_scene, ResultRecord, SceneFile};

pub const METRICS_HEADER: [&str; 5] = ["object_id", "o3d", "o3d_stderr", "axis_angle_deg", "position_error"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("I/O failure on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("detection of object {object_id} references camera {camera_id}, which is not in the scene")]
    DanglingReference { object_id: ObjectId, camera_id: CameraId },
    #[error("{} object(s) could not be fitted", .0.len())]
    FitFailures(Vec<(ObjectId, EstimationError)>),
    #[error("gradient check failed for: {}", .0.join(", "))]
    GradientCheckFailed(Vec<String>),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "ConfigParse",
            CliError::Io { .. } => "IoFailure",
            CliError::InvalidInput(_) => "InvalidInput",
            CliError::DanglingReference { .. } => "DanglingReference",
            CliError::FitFailures(_) => "FitFailed",
            CliError::GradientCheckFailed(_) => "GradientCheckFailed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidInput(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::DanglingReference { .. } => 5,
            CliError::FitFailures(_) => 6,
            CliError::GradientCheckFailed(_) => 7,
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::DanglingReference { object_id, camera_id } => {
                v["object_id"] = json!(object_id);
                v["camera_id"] = json!(camera_id);
            }
            CliError::FitFailures(f) => {
                v["objects"] = f.iter().map(|(id, e)| json!({ "object_id": id, "reason": e.to_string() })).collect();
            }
            CliError::GradientCheckFailed(k) => v["kernels"] = json!(k),
            _ => {}
        }
        v
    }
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = match path {
        Some(p) => io::read_json(p)?,
        None => ExperimentConfig::default(),
    };
    Ok(cfg)
}

/// Writes `scene.json` and `detections.json` into `out_dir`.
///
/// The scene keeps every camera; detections are restricted to the
/// `view_fraction` subset and carry uncertainties in `uncertainty_mode`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    cfg.validate().map_err(CliError::InvalidInput)?;
    let seed = cfg.scene.seed;
    let scene = generate_scene(&cfg.scene).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    let detections =
        render_detections(&scene, &cfg.noise, derive_seed(seed, 1)).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    let cameras = scene.every_kth_camera(cfg.view_fraction.stride());
    let kept: Vec<Detection> = detections.into_iter().filter(|d| cameras.contains_key(&d.camera_id)).collect();
    let kept = corrupt_uncertainties(&kept, cfg.uncertainty_mode, derive_seed(seed, 2));

    let scene_path = out_dir.join("scene.json");
    let det_path = out_dir.join("detections.json");
    write_scene(&scene_path, &scene)?;
    write_json(&det_path, &kept)?;
    Ok((scene_path, det_path))
}

/// Fits every object and writes `results.json`. Objects that fail are
/// reported through [`CliError::FitFailures`] after the successful ones are
/// written.
pub fn cmd_fit(
    scene_path: &Path,
    detections_path: &Path,
    weights: UncertaintyMode,
    opts: &SolverOptions,
    out: &Path,
) -> Result<Vec<ResultRecord>, CliError> {
    let scene = read_scene(scene_path)?;
    let detections = read_detections(detections_path)?;
    if let Some(d) = detections.iter().find(|d| !scene.cameras.contains_key(&d.camera_id)) {
        return Err(CliError::DanglingReference { object_id: d.object_id, camera_id: d.camera_id });
    }
    let detections = corrupt_uncertainties(&detections, weights, 0);
    let fit = fit_scene(&detections, &scene.cameras, opts);
    let records: Vec<ResultRecord> = fit.reports.iter().map(|(id, r)| ResultRecord::from_report(*id, r)).collect();
    write_json(out, &records)?;
    if !fit.failures.is_empty() {
        return Err(CliError::FitFailures(fit.failures.into_iter().collect()));
    }
    Ok(records)
}

pub fn metrics_csv(eval: &EvalResult) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER).map_err(bench::csv_error)?;
    for m in &eval.per_object {
        w.write_record([
            m.object_id.to_string(),
            m.o3d.to_string(),
            m.o3d_stderr.to_string(),
            m.axis_angle_deg.to_string(),
            m.position_error.to_string(),
        ])
        .map_err(bench::csv_error)?;
    }
    w.write_record([
        "mean".to_owned(),
        eval.o3d.to_string(),
        eval.o3d_stderr.to_string(),
        eval.axis_angle_deg.to_string(),
        eval.position_error.to_string(),
    ])
    .map_err(bench::csv_error)?;
    w.into_inner().map_err(|e| CliError::InvalidInput(e.to_string()))
}

/// Scores `results.json` against the scene's ground truth.
pub fn cmd_eval(scene_path: &Path, results_path: &Path, n_samples: usize, seed: u64) -> Result<(EvalResult, Vec<u8>), CliError> {
    let scene = read_scene(scene_path)?;
    let results = read_results(results_path)?;
    let estimates = results.iter().map(|r| (r.object_id, r.q)).collect();
    let eval = evaluate(&scene.objects, &estimates, n_samples, seed);
    for id in &eval.missing {
        log::warn!("no estimate for object {id}");
    }
    let csv = metrics_csv(&eval)?;
    Ok((eval, csv))
}

pub fn cmd_gradcheck(kernels: &[GradKernel], seed: u64, count: usize) -> Result<Vec<KernelReport>, CliError> {
    if count == 0 {
        log::warn!("gradcheck with count = 0 checks nothing");
    }
    let reports = run_gradcheck(kernels, seed, count);
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.kernel.clone()).collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        for r in reports.iter().filter(|r| !r.passed) {
            log::error!("{}: max relative error {:e} exceeds {:e}", r.kernel, r.max_error, r.tolerance);
        }
        Err(CliError::GradientCheckFailed(failed))
    }
}

pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<(BenchTable, Vec<u8>), CliError> {
    let table = run_bench(cfg)?;
    let csv = table.to_csv()?;
    Ok((table, csv))
}

#[derive(Debug, Parser)]
#[command(name = "occlusion3d", version, about = "Multi-view ellipsoid estimation from uncertain ellipse detections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scene and simulated detections.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// 1, 1/2 or 1/4 of the cameras.
        #[arg(long)]
        view_fraction: Option<ViewFraction>,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate one ellipsoid per object.
    Fit {
        scene: PathBuf,
        detections: PathBuf,
        #[arg(long, value_enum, default_value_t = UncertaintyMode::Oracle)]
        weights: UncertaintyMode,
        /// Drop the divergence residual.
        #[arg(long)]
        no_divergence: bool,
        /// Fail instead of dropping views that do not project.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = SolverOptions::default().max_iters)]
        max_iters: usize,
        #[arg(long, default_value = "results.json")]
        out: PathBuf,
    },
    /// Compare fitted ellipsoids with the ground truth.
    Eval {
        scene: PathBuf,
        results: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_IOU_SAMPLES)]
        samples: usize,
        /// CSV path; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the analytic loss gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Run the weighting and view-count experiment.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// CSV path; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => io::write_atomic(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), message: e.to_string() })
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, seed, view_fraction, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.scene.seed = s;
            }
            if let Some(f) = view_fraction {
                cfg.view_fraction = f;
            }
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            cmd_simulate(&cfg, &dir)?;
        }
        Command::Fit { scene, detections, weights, no_divergence, strict, max_iters, out } => {
            let opts = SolverOptions { max_iters, use_divergence: !no_divergence, strict };
            cmd_fit(&scene, &detections, weights, &opts, &out)?;
        }
        Command::Eval { scene, results, seed, samples, out } => {
            let (_, csv) = cmd_eval(&scene, &results, samples, seed)?;
            emit(out.as_deref(), &csv)?;
        }
        Command::Gradcheck { seed, count } => {
            let result = cmd_gradcheck(&default_kernels(), seed, count);
            let reports = match &result {
                Ok(r) => r.clone(),
                Err(_) => run_gradcheck(&default_kernels(), seed, count),
            };
            for r in &reports {
                println!(
                    "{} {} checked={} max_error={:e} tolerance={:e}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.kernel,
                    r.checked,
                    r.max_error,
                    r.tolerance
                );
            }
            result?;
        }
        Command::Bench { config, seed, trials, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.scene.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let (_, csv) = cmd_bench(&cfg)?;
            emit(out.as_deref(), &csv)?;
        }
    }
    Ok(())
}
