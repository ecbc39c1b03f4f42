use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Matrix3, Vector2};

use super::{GeometryError, DEGENERACY_TOL, SYMMETRY_TOL};

/// Folds an angle into the canonical range `(-π/2, π/2]`.
pub fn wrap_half_pi(theta: f64) -> f64 {
    let mut r = theta - PI * (theta / PI).round();
    if r <= -FRAC_PI_2 {
        r += PI;
    } else if r > FRAC_PI_2 {
        r -= PI;
    }
    r
}

/// A 2D ellipse in canonical form: `a >= b > 0`, `theta` in `(-π/2, π/2]`.
///
/// `theta` is the angle of the major axis measured from the image x-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    x: f64,
    y: f64,
    a: f64,
    b: f64,
    theta: f64,
}

impl Ellipse {
    /// Builds a canonical ellipse. Axes given in the wrong order are swapped and
    /// the angle is rotated by π/2 so the same geometric ellipse results.
    pub fn new(x: f64, y: f64, a: f64, b: f64, theta: f64) -> Result<Self, GeometryError> {
        if ![x, y, a, b, theta].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidEllipse("non-finite parameter".into()));
        }
        if a <= 0.0 || b <= 0.0 {
            return Err(GeometryError::InvalidEllipse(format!(
                "semi-axes must be positive, got a={a}, b={b}"
            )));
        }
        let (a, b, theta) = if a < b { (b, a, theta + FRAC_PI_2) } else { (a, b, theta) };
        Ok(Self { x, y, a, b, theta: wrap_half_pi(theta) })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Side of the axis-aligned square that encloses the ellipse under any rotation,
    /// `2·sqrt(a² + b²)`.
    pub fn enclosing_square_side(&self) -> f64 {
        2.0 * self.a.hypot(self.b)
    }

    /// Returns true when `p` lies inside or on the ellipse.
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        let (s, c) = self.theta.sin_cos();
        let d = p - self.center();
        let u = (c * d.x + s * d.y) / self.a;
        let v = (-s * d.x + c * d.y) / self.b;
        u * u + v * v <= 1.0
    }

    /// Applies a uniform scale about the image origin.
    pub fn scaled(&self, k: f64) -> Result<Self, GeometryError> {
        Self::new(k * self.x, k * self.y, k * self.a, k * self.b, self.theta)
    }
}

/// Dual (line) conic of an ellipse, stored with the `(3,3)` entry fixed to `-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualConic(Matrix3<f64>);

impl DualConic {
    /// Wraps an arbitrary homogeneous 3×3 matrix. The matrix must be symmetric;
    /// it is symmetrized and rescaled so that its `(3,3)` entry is `-1`.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let scale = m.amax();
        if !scale.is_finite() || scale == 0.0 {
            return Err(GeometryError::DegenerateConic);
        }
        let asym = (m - m.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL {
            return Err(GeometryError::NotSymmetric(asym));
        }
        Self::normalize(0.5 * (m + m.transpose()))
    }

    /// Symmetrizes and normalizes without the symmetry check. Used for products
    /// such as `P Q* Pᵀ` whose asymmetry is pure round-off.
    pub(crate) fn normalize(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let m = 0.5 * (m + m.transpose());
        let w = m[(2, 2)];
        if !w.is_finite() || w.abs() <= DEGENERACY_TOL * m.norm() {
            return Err(GeometryError::DegenerateConic);
        }
        Ok(Self(m / -w))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Dual conic `H · diag(a², b², -1) · Hᵀ`, where `H` maps the canonical frame
/// of the ellipse to the image. Its `(3,3)` entry is `-1` by construction.
pub fn ellipse_to_dual_conic(e: &Ellipse) -> DualConic {
    let (s, c) = e.theta.sin_cos();
    let h = Matrix3::new(c, -s, e.x, s, c, e.y, 0.0, 0.0, 1.0);
    let core = Matrix3::from_diagonal(&nalgebra::Vector3::new(e.a * e.a, e.b * e.b, -1.0));
    let m = h * core * h.transpose();
    DualConic(0.5 * (m + m.transpose()))
}

/// Recovers the five ellipse parameters from a dual conic.
///
/// With the `(3,3)` entry at `-1` the dual conic reads
/// `[[M - c cᵀ, -c], [-cᵀ, -1]]`, where `c` is the center and
/// `M = R diag(a², b²) Rᵀ`. The center is read off the last column and the
/// axes come from the closed-form eigen-decomposition of `M`.
pub fn dual_conic_to_ellipse(c: &DualConic) -> Result<Ellipse, GeometryError> {
    let m = c.0;
    let norm = m.norm();
    let center = Vector2::new(-m[(0, 2)], -m[(1, 2)]);
    let shape: Matrix2<f64> = m.fixed_view::<2, 2>(0, 0).into_owned() + center * center.transpose();

    let p = shape[(0, 0)];
    let q = shape[(1, 1)];
    let r = 0.5 * (shape[(0, 1)] + shape[(1, 0)]);
    let mean = 0.5 * (p + q);
    let radius = (0.5 * (p - q)).hypot(r);
    let major_sq = mean + radius;
    let minor_sq = mean - radius;
    if !minor_sq.is_finite() || minor_sq <= DEGENERACY_TOL * norm.max(1.0) {
        return Err(GeometryError::DegenerateConic);
    }
    let theta = 0.5 * (2.0 * r).atan2(p - q);
    Ellipse::new(center.x, center.y, major_sq.sqrt(), minor_sq.sqrt(), theta)
        .map_err(|_| GeometryError::DegenerateConic)
}
