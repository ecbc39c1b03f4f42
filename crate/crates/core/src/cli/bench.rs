//! Paired Monte-Carlo comparison of estimators across camera subsets.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::estimation::{fit_scene, SolverOptions};
use crate::metrics::evaluate;
use crate::simulation::{corrupt_uncertainties, generate_scene, render_detections, SceneConfig};

use super::config::{ExperimentConfig, ViewFraction};
use super::CliError;

/// Independent seed for stream `tag` of a run seeded with `base`.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(tag);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    O3d,
    AxisAngleDeg,
    PositionError,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::O3d, Metric::AxisAngleDeg, Metric::PositionError];

    pub fn name(self) -> &'static str {
        match self {
            Metric::O3d => "o3d",
            Metric::AxisAngleDeg => "axis_angle_deg",
            Metric::PositionError => "position_error",
        }
    }
}

/// Scene-averaged metrics of one method on one camera subset of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: usize,
    pub fraction: ViewFraction,
    /// Failed objects count as zero overlap.
    pub o3d: f64,
    /// Mean over fitted objects only; NaN if none were fitted.
    pub axis_angle_deg: f64,
    pub position_error: f64,
    pub failures: usize,
}

impl TrialRecord {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::O3d => self.o3d,
            Metric::AxisAngleDeg => self.axis_angle_deg,
            Metric::PositionError => self.position_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Cell {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub methods: Vec<String>,
    pub fractions: Vec<ViewFraction>,
    pub records: Vec<TrialRecord>,
}

impl BenchTable {
    pub fn trials(&self, method: usize, fraction: ViewFraction) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| r.method == method && r.fraction == fraction)
    }

    pub fn cell(&self, method: usize, fraction: ViewFraction, metric: Metric) -> Cell {
        Cell::from_values(self.trials(method, fraction).map(|r| r.get(metric)))
    }

    /// Per-trial differences `a - b` of a metric, paired by trial.
    pub fn paired_differences(&self, a: usize, b: usize, fraction: ViewFraction, metric: Metric) -> Vec<f64> {
        self.trials(a, fraction).zip(self.trials(b, fraction)).map(|(x, y)| x.get(metric) - y.get(metric)).collect()
    }

    /// One row per method; columns are `metric@fraction` and its standard error.
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_owned()];
        for f in &self.fractions {
            for m in Metric::ALL {
                header.push(format!("{}@{}", m.name(), f.label()));
                header.push(format!("{}@{}_se", m.name(), f.label()));
            }
        }
        header.push("fit_failures".to_owned());
        w.write_record(&header).map_err(csv_error)?;
        for (i, name) in self.methods.iter().enumerate() {
            let mut row = vec![name.clone()];
            for &f in &self.fractions {
                for m in Metric::ALL {
                    let c = self.cell(i, f, m);
                    row.push(c.mean.to_string());
                    row.push(c.stderr.to_string());
                }
            }
            let failures: usize = self.records.iter().filter(|r| r.method == i).map(|r| r.failures).sum();
            row.push(failures.to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.into_inner().map_err(|e| CliError::InvalidInput(e.to_string()))
    }
}

pub(super) fn csv_error(e: csv::Error) -> CliError {
    CliError::InvalidInput(e.to_string())
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>, CliError> {
    let base = cfg.scene.seed;
    let t = trial as u64;
    let scene_cfg = SceneConfig { seed: derive_seed(base, 4 * t), ..cfg.scene };
    let scene = generate_scene(&scene_cfg).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    let detections =
        render_detections(&scene, &cfg.noise, derive_seed(base, 4 * t + 1)).map_err(|e| CliError::InvalidInput(e.to_string()))?;

    let mut out = Vec::new();
    for &fraction in &ViewFraction::ALL {
        let cameras = scene.every_kth_camera(fraction.stride());
        let subset: Vec<_> = detections.iter().filter(|d| cameras.contains_key(&d.camera_id)).copied().collect();
        for (m, method) in cfg.methods.iter().enumerate() {
            let dets = corrupt_uncertainties(&subset, method.weights, derive_seed(base, 4 * t + 2));
            let opts = SolverOptions { use_divergence: method.use_divergence, ..cfg.solver };
            let fit = fit_scene(&dets, &cameras, &opts);
            let estimates = fit.reports.iter().map(|(id, r)| (*id, r.q_hat)).collect();
            let eval = evaluate(&scene.objects, &estimates, cfg.iou_samples, derive_seed(base, 4 * t + 3));
            let n = scene.objects.len() as f64;
            let fitted = eval.per_object.len();
            let mean_fitted = |f: fn(&crate::metrics::ObjectMetrics) -> f64| {
                if fitted == 0 {
                    f64::NAN
                } else {
                    eval.per_object.iter().map(f).sum::<f64>() / fitted as f64
                }
            };
            out.push(TrialRecord {
                trial,
                method: m,
                fraction,
                o3d: eval.per_object.iter().map(|o| o.o3d).sum::<f64>() / n,
                axis_angle_deg: mean_fitted(|o| o.axis_angle_deg),
                position_error: mean_fitted(|o| o.position_error),
                failures: eval.missing.len(),
            });
        }
    }
    Ok(out)
}

/// Runs `cfg.trials` independent scenes, each evaluated for every method and
/// view fraction on the same detections.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchTable, CliError> {
    cfg.validate().map_err(CliError::InvalidInput)?;
    let per_trial: Vec<Vec<TrialRecord>> =
        (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect::<Result<_, _>>()?;
    Ok(BenchTable {
        methods: cfg.methods.iter().map(|m| m.name.clone()).collect(),
        fractions: ViewFraction::ALL.to_vec(),
        records: per_trial.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig { trials: 2, iou_samples: 5_000, ..ExperimentConfig::default() }
    }

    #[test]
    fn cardinality_and_determinism() {
        let cfg = small();
        let table = run_bench(&cfg).unwrap();
        assert_eq!(table.records.len(), 2 * 2 * 3);
        for m in 0..2 {
            for f in ViewFraction::ALL {
                let c = table.cell(m, f, Metric::O3d);
                assert_eq!(c.n, 2);
                assert!((0.0..=1.0).contains(&c.mean));
            }
        }
        let csv = table.to_csv().unwrap();
        assert_eq!(csv, run_bench(&cfg).unwrap().to_csv().unwrap());
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 1 + 3 * 3 * 2 + 1);
        assert!(lines[0].starts_with("method,o3d@1,o3d@1_se,axis_angle_deg@1,"));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(1, 5), derive_seed(1, 5));
    }

    #[test]
    fn cell_statistics() {
        let c = Cell::from_values([1.0, 2.0, 3.0, f64::NAN]);
        assert_eq!(c.n, 3);
        assert_eq!(c.mean, 2.0);
        assert!((c.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
