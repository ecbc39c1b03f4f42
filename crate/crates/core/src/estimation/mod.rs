//! Multi-view ellipsoid estimation from ellipse-offset detections.
//!
//! Each detection contributes a 6-vector offset residual weighted by its
//! offset covariance `Λ` and a scalar divergence residual weighted by its
//! observation variance `λ`. Camera poses are known; only the nine ellipsoid
//! parameters are optimized.

mod init;
mod lm;
mod residual;
mod scene;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{EllipseOffsets, EncodingError, RefSquare};
use crate::geometry::{Camera, EllipsoidParams, GeometryError};
use crate::uncertainty::{DetectionUncertainty, UncertaintyError};

pub use init::{init_closed_form, init_from_centers, ILL_CONDITIONED_RATIO};
pub use lm::{levenberg_marquardt, LmOptions, LmOutcome};
pub use residual::{divergence_residual, offset_residual, projected_ellipse, projected_offsets};
pub use scene::{fit_map, fit_scene, group_by_object, SceneFit};

pub type CameraId = u32;
pub type ObjectId = u32;
pub type CameraMap = BTreeMap<CameraId, Camera>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error("detection references unknown camera {0}")]
    UnknownCamera(CameraId),
    #[error("need at least 3 views, got {0}")]
    InsufficientViews(usize),
    #[error("linear system is ill-conditioned (singular value ratio {0:.3})")]
    IllConditioned(f64),
    #[error("fit diverged: cost is not finite")]
    DivergedFit,
    #[error("every view failed to project")]
    AllViewsDropped,
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
}

/// One object seen in one view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub object_id: ObjectId,
    pub camera_id: CameraId,
    pub offsets: EllipseOffsets,
    pub ref_square: RefSquare,
    #[serde(rename = "alpha")]
    pub unc: DetectionUncertainty,
}

impl Detection {
    pub fn weights(&self) -> WeightMatrices {
        WeightMatrices::from_uncertainty(&self.unc)
    }
}

/// Diagonal offset covariance and observation variance of a detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightMatrices {
    pub lambda: [f64; 6],
    pub lambda_d: f64,
}

impl WeightMatrices {
    pub fn from_uncertainty(unc: &DetectionUncertainty) -> Self {
        Self { lambda: unc.offset_variances(), lambda_d: unc.observation_variance() }
    }

    fn validate(&self) -> Result<(), EstimationError> {
        if self.lambda.iter().chain(std::iter::once(&self.lambda_d)).all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(EstimationError::InvalidDetection(format!("non-positive variance in {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Include the `d̂²/λ` divergence term.
    pub use_divergence: bool,
    /// Fail instead of dropping views whose projection is invalid.
    pub strict: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iters: 100, use_divergence: true, strict: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    ClosedForm,
    CenterTriangulation,
    Given,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub q_hat: EllipsoidParams,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub init: InitMethod,
    /// Weighted residual norm of every view that took part in the fit.
    pub per_view_residual_norms: Vec<(CameraId, f64)>,
    pub dropped_views: Vec<CameraId>,
}
