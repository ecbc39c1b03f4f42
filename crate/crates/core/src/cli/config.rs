use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::estimation::SolverOptions;
use crate::metrics::DEFAULT_IOU_SAMPLES;
use crate::simulation::{NoiseModel, SceneConfig, UncertaintyMode};

/// Fraction of the camera ring used: every `k`-th camera in id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum ViewFraction {
    All,
    Half,
    Quarter,
}

impl ViewFraction {
    pub const ALL: [ViewFraction; 3] = [ViewFraction::All, ViewFraction::Half, ViewFraction::Quarter];

    pub fn stride(self) -> usize {
        match self {
            ViewFraction::All => 1,
            ViewFraction::Half => 2,
            ViewFraction::Quarter => 4,
        }
    }

    /// Column label: `1`, `1/2` or `1/4`.
    pub fn label(self) -> &'static str {
        match self {
            ViewFraction::All => "1",
            ViewFraction::Half => "1/2",
            ViewFraction::Quarter => "1/4",
        }
    }
}

impl From<ViewFraction> for f64 {
    fn from(v: ViewFraction) -> f64 {
        1.0 / v.stride() as f64
    }
}

impl TryFrom<f64> for ViewFraction {
    type Error = String;

    fn try_from(v: f64) -> Result<Self, String> {
        ViewFraction::ALL
            .into_iter()
            .find(|f| f64::from(*f) == v)
            .ok_or_else(|| format!("view fraction must be 1, 0.5 or 0.25, got {v}"))
    }
}

impl FromStr for ViewFraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(f) = ViewFraction::ALL.into_iter().find(|f| f.label() == s) {
            return Ok(f);
        }
        let v: f64 = s.parse().map_err(|_| format!("expected 1, 1/2, 1/4 or a decimal, got {s:?}"))?;
        ViewFraction::try_from(v)
    }
}

impl fmt::Display for ViewFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One estimator configuration compared by the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Method {
    pub name: String,
    pub weights: UncertaintyMode,
    #[serde(default = "default_true")]
    pub use_divergence: bool,
}

fn default_true() -> bool {
    true
}

impl Method {
    pub fn new(name: &str, weights: UncertaintyMode, use_divergence: bool) -> Self {
        Self { name: name.to_owned(), weights, use_divergence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub noise: NoiseModel,
    /// Uncertainties written by `simulate`.
    pub uncertainty_mode: UncertaintyMode,
    /// Camera subset used by `simulate`.
    pub view_fraction: ViewFraction,
    pub trials: usize,
    pub solver: SolverOptions,
    pub output_dir: PathBuf,
    /// Monte-Carlo samples per IoU estimate.
    pub iou_samples: usize,
    /// Rows of the benchmark table.
    pub methods: Vec<Method>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            noise: NoiseModel::default(),
            uncertainty_mode: UncertaintyMode::Oracle,
            view_fraction: ViewFraction::All,
            trials: 1,
            solver: SolverOptions::default(),
            output_dir: PathBuf::from("out"),
            iou_samples: DEFAULT_IOU_SAMPLES,
            methods: vec![
                Method::new("oracle", UncertaintyMode::Oracle, true),
                Method::new("identity", UncertaintyMode::Identity, true),
            ],
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.scene.validate().map_err(|e| e.to_string())?;
        self.noise.validate().map_err(|e| e.to_string())?;
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if self.iou_samples == 0 {
            return Err("iou_samples must be at least 1".into());
        }
        if self.methods.is_empty() {
            return Err("methods must not be empty".into());
        }
        Ok(())
    }
}
