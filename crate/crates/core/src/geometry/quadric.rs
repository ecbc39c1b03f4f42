use nalgebra::{Matrix3, Matrix4, Rotation3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{Camera, DualConic, GeometryError, DEGENERACY_TOL, SYMMETRY_TOL};

/// Nine-parameter ellipsoid: rotation angles, centroid, semi-axes.
///
/// The rotation is intrinsic Z-Y-X: `R = Rz(theta[0]) · Ry(theta[1]) · Rx(theta[2])`.
/// The columns of `R` are the directions of the semi-axes `s[0..3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEllipsoidParams", into = "RawEllipsoidParams")]
pub struct EllipsoidParams {
    theta: [f64; 3],
    t: [f64; 3],
    s: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct RawEllipsoidParams {
    theta: [f64; 3],
    t: [f64; 3],
    s: [f64; 3],
}

impl TryFrom<RawEllipsoidParams> for EllipsoidParams {
    type Error = GeometryError;

    fn try_from(raw: RawEllipsoidParams) -> Result<Self, Self::Error> {
        Self::new(raw.theta, raw.t, raw.s)
    }
}

impl From<EllipsoidParams> for RawEllipsoidParams {
    fn from(q: EllipsoidParams) -> Self {
        Self { theta: q.theta, t: q.t, s: q.s }
    }
}

impl EllipsoidParams {
    pub fn new(theta: [f64; 3], t: [f64; 3], s: [f64; 3]) -> Result<Self, GeometryError> {
        if !theta.iter().chain(&t).chain(&s).all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidEllipsoid("non-finite parameter".into()));
        }
        if s.iter().any(|&v| v <= 0.0) {
            return Err(GeometryError::InvalidEllipsoid(format!("semi-axes must be positive, got {s:?}")));
        }
        Ok(Self { theta, t, s })
    }

    /// Axis-aligned ellipsoid.
    pub fn axis_aligned(t: [f64; 3], s: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new([0.0; 3], t, s)
    }

    /// Parameter vector `(theta1, theta2, theta3, t1, t2, t3, s1, s2, s3)`.
    pub fn to_vector(&self) -> [f64; 9] {
        let mut v = [0.0; 9];
        v[..3].copy_from_slice(&self.theta);
        v[3..6].copy_from_slice(&self.t);
        v[6..].copy_from_slice(&self.s);
        v
    }

    pub fn from_vector(v: &[f64]) -> Result<Self, GeometryError> {
        if v.len() != 9 {
            return Err(GeometryError::InvalidEllipsoid(format!("expected 9 parameters, got {}", v.len())));
        }
        Self::new([v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]])
    }

    pub fn theta(&self) -> [f64; 3] {
        self.theta
    }

    pub fn t(&self) -> [f64; 3] {
        self.t
    }

    pub fn s(&self) -> [f64; 3] {
        self.s
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.t)
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.theta[2], self.theta[1], self.theta[0])
    }

    /// Shape matrix `R diag(s²) Rᵀ`; points inside satisfy `(x-t)ᵀ shape⁻¹ (x-t) <= 1`.
    pub fn shape_matrix(&self) -> Matrix3<f64> {
        let r = self.rotation().into_inner();
        let d = Matrix3::from_diagonal(&Vector3::new(self.s[0].powi(2), self.s[1].powi(2), self.s[2].powi(2)));
        r * d * r.transpose()
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.s[0] * self.s[1] * self.s[2]
    }

    /// Returns true when `p` lies inside or on the ellipsoid.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let local = self.rotation().inverse() * (p - self.center());
        (0..3).map(|i| (local[i] / self.s[i]).powi(2)).sum::<f64>() <= 1.0
    }

    /// Half-widths of the axis-aligned bounding box.
    pub fn aabb_half_extent(&self) -> Vector3<f64> {
        let r = self.rotation().into_inner();
        Vector3::from_fn(|i, _| (0..3).map(|j| (r[(i, j)] * self.s[j]).powi(2)).sum::<f64>().sqrt())
    }

    /// Applies a rigid transform `x -> rot·x + trans` to the ellipsoid.
    pub fn transformed(&self, rot: &Rotation3<f64>, trans: &Vector3<f64>) -> Self {
        let r = rot * self.rotation();
        let (roll, pitch, yaw) = r.euler_angles();
        let c = rot * self.center() + trans;
        Self { theta: [yaw, pitch, roll], t: [c.x, c.y, c.z], s: self.s }
    }
}

/// Dual quadric stored with the `(4,4)` entry fixed to `-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuadric(Matrix4<f64>);

impl DualQuadric {
    /// Wraps a homogeneous symmetric 4×4 matrix, rescaling to `(4,4) = -1`.
    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self, GeometryError> {
        let scale = m.amax();
        if !scale.is_finite() || scale == 0.0 {
            return Err(GeometryError::NotAnEllipsoid);
        }
        let asym = (m - m.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL {
            return Err(GeometryError::NotSymmetric(asym));
        }
        let m = 0.5 * (m + m.transpose());
        let w = m[(3, 3)];
        if w.abs() <= DEGENERACY_TOL * m.norm() {
            return Err(GeometryError::NotAnEllipsoid);
        }
        Ok(Self(m / -w))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Centroid read from the last column.
    pub fn centroid(&self) -> Vector3<f64> {
        -self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }
}

/// `Q* = Z · diag(s1², s2², s3², -1) · Zᵀ` with `Z = [[R, t], [0, 1]]`.
pub fn compose_dual_quadric(q: &EllipsoidParams) -> DualQuadric {
    let mut z = Matrix4::identity();
    z.fixed_view_mut::<3, 3>(0, 0).copy_from(q.rotation().matrix());
    z.fixed_view_mut::<3, 1>(0, 3).copy_from(&q.center());
    let core = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        q.s[0] * q.s[0],
        q.s[1] * q.s[1],
        q.s[2] * q.s[2],
        -1.0,
    ));
    let m = z * core * z.transpose();
    DualQuadric(0.5 * (m + m.transpose()))
}

/// Inverse of [`compose_dual_quadric`].
///
/// Semi-axes come out sorted in descending order. Eigenvector signs are fixed
/// so that the first nonzero component of the first two columns is positive;
/// the third column is their cross product, so `det(R) = +1`.
pub fn decompose_dual_quadric(q: &DualQuadric) -> Result<EllipsoidParams, GeometryError> {
    let m = q.0;
    let t = q.centroid();
    let shape: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned() + t * t.transpose();
    let shape = 0.5 * (shape + shape.transpose());
    let eig = SymmetricEigen::new(shape);

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let smallest = eig.eigenvalues[order[2]];
    if !smallest.is_finite() || smallest <= DEGENERACY_TOL * m.norm() {
        return Err(GeometryError::NotAnEllipsoid);
    }

    let mut r = Matrix3::zeros();
    for (k, &i) in order.iter().take(2).enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        let lead = col.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
        if lead < 0.0 {
            col = -col;
        }
        r.set_column(k, &col);
    }
    let third = r.column(0).cross(&r.column(1));
    r.set_column(2, &third);

    let (roll, pitch, yaw) = Rotation3::from_matrix_unchecked(r).euler_angles();
    let s = [
        eig.eigenvalues[order[0]].sqrt(),
        eig.eigenvalues[order[1]].sqrt(),
        eig.eigenvalues[order[2]].sqrt(),
    ];
    EllipsoidParams::new([yaw, pitch, roll], [t.x, t.y, t.z], s).map_err(|_| GeometryError::NotAnEllipsoid)
}

/// Projects a dual quadric through a pinhole camera: `C* = P Q* Pᵀ`.
pub fn project_dual_quadric(q: &DualQuadric, cam: &Camera) -> Result<DualConic, GeometryError> {
    let depth = cam.depth_of(&q.centroid());
    if !(depth > 0.0) {
        return Err(GeometryError::BehindCamera(depth));
    }
    let p = cam.projection_matrix();
    let c = DualConic::normalize(p * q.0 * p.transpose())?;
    // Real ellipse iff the 2×2 shape block M = C + c cᵀ is positive definite.
    let m = c.matrix();
    let a = m[(0, 0)] + m[(0, 2)] * m[(0, 2)];
    let b = m[(0, 1)] + m[(0, 2)] * m[(1, 2)];
    let d = m[(1, 1)] + m[(1, 2)] * m[(1, 2)];
    let det = a * d - b * b;
    if !(a > 0.0 && det > DEGENERACY_TOL * m.norm().powi(2)) {
        return Err(GeometryError::DegenerateConic);
    }
    Ok(c)
}
