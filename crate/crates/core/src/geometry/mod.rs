//! 2D/3D geometric primitives: ellipses and their dual conics, ellipsoids and
//! their dual quadrics, pinhole cameras, and minimum-volume enclosing
//! ellipsoids.
//!
//! Homogeneous matrices are always stored scale-normalized: the last diagonal
//! entry is fixed to `-1`, which makes matrix equality meaningful.

mod camera;
mod ellipse;
mod mvee;
mod quadric;

pub use camera::{Camera, Intrinsics};
pub use ellipse::{dual_conic_to_ellipse, ellipse_to_dual_conic, wrap_half_pi, DualConic, Ellipse};
pub use mvee::{min_volume_enclosing_ellipsoid, MVEE_DEFAULT_TOL, MVEE_MAX_ITERS};
pub use quadric::{
    compose_dual_quadric, decompose_dual_quadric, project_dual_quadric, DualQuadric, EllipsoidParams,
};

use thiserror::Error;

/// Relative tolerance used for symmetry checks on homogeneous matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative threshold below which a determinant or eigenvalue is treated as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid ellipse: {0}")]
    InvalidEllipse(String),
    #[error("invalid ellipsoid parameters: {0}")]
    InvalidEllipsoid(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("conic does not represent a real, non-degenerate ellipse")]
    DegenerateConic,
    #[error("quadric does not represent a real ellipsoid")]
    NotAnEllipsoid,
    #[error("ellipsoid centroid is behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}
