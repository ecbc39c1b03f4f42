use nalgebra::{Matrix3, Matrix3x4, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Pinhole intrinsics with zero skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Calibrated pinhole camera. `r` and `t` map world points into the camera
/// frame (`x_cam = r·x_world + t`), with +z along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    intrinsics: Intrinsics,
    r: Matrix3<f64>,
    t: Vector3<f64>,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self, GeometryError> {
        let Intrinsics { fx, fy, cx, cy } = intrinsics;
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(GeometryError::InvalidCamera(format!("focal lengths must be positive, got fx={fx}, fy={fy}")));
        }
        if !r.iter().chain(t.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidCamera("non-finite extrinsics".into()));
        }
        let ortho = (r * r.transpose() - Matrix3::identity()).amax();
        let det = r.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidCamera(format!(
                "rotation not orthonormal (|RRᵀ - I| = {ortho:e}, det = {det})"
            )));
        }
        Ok(Self { intrinsics, r, t })
    }

    /// Camera at `eye` whose optical axis points at `target`. Image y points
    /// down, so `up` maps to negative image y.
    pub fn look_at(
        intrinsics: Intrinsics,
        eye: &Vector3<f64>,
        target: &Vector3<f64>,
        up: &Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidCamera("eye coincides with target".into()))?;
        let x = z
            .cross(up)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidCamera("up vector parallel to viewing direction".into()))?;
        let y = z.cross(&x);
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Self::new(intrinsics, r, -r * eye)
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn k(&self) -> Matrix3<f64> {
        self.intrinsics.matrix()
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.t
    }

    /// `P = K [R | t]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.r);
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.t);
        self.k() * rt
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -self.r.transpose() * self.t
    }

    /// Depth of a world point along the optical axis.
    pub fn depth_of(&self, p: &Vector3<f64>) -> f64 {
        (self.r * p + self.t).z
    }

    pub fn project_point(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        let pc = self.r * p + self.t;
        if pc.z <= 0.0 {
            return None;
        }
        let h = self.k() * pc;
        Some(Vector2::new(h.x / h.z, h.y / h.z))
    }

    /// The same physical camera expressed after the world frame is moved by
    /// `x -> rot·x + trans`.
    pub fn with_world_transformed(&self, rot: &Rotation3<f64>, trans: &Vector3<f64>) -> Self {
        let rinv = rot.inverse().into_inner();
        let r = self.r * rinv;
        Self { intrinsics: self.intrinsics, r, t: self.t - r * trans }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> Intrinsics {
        Intrinsics { fx: 400.0, fy: 400.0, cx: 320.0, cy: 240.0 }
    }

    #[test]
    fn look_at_centers_target() {
        let cam = Camera::look_at(intr(), &Vector3::new(4.0, 1.0, 2.0), &Vector3::zeros(), &Vector3::z()).unwrap();
        let px = cam.project_point(&Vector3::zeros()).unwrap();
        assert!((px - Vector2::new(320.0, 240.0)).norm() < 1e-9);
        assert!((cam.center() - Vector3::new(4.0, 1.0, 2.0)).norm() < 1e-12);
        // World up projects above the principal point.
        let up = cam.project_point(&Vector3::new(0.0, 0.0, 0.1)).unwrap();
        assert!(up.y < 240.0);
    }

    #[test]
    fn rejects_bad_cameras() {
        let bad = Intrinsics { fx: 0.0, ..intr() };
        assert!(Camera::new(bad, Matrix3::identity(), Vector3::zeros()).is_err());
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Camera::new(intr(), reflection, Vector3::zeros()).is_err());
        assert!(Camera::look_at(intr(), &Vector3::z(), &Vector3::zeros(), &Vector3::z()).is_err());
    }

    #[test]
    fn world_transform_preserves_pixels() {
        let cam = Camera::look_at(intr(), &Vector3::new(-3.0, 2.0, 1.0), &Vector3::zeros(), &Vector3::z()).unwrap();
        let rot = Rotation3::from_euler_angles(0.3, -0.5, 1.2);
        let trans = Vector3::new(1.0, -2.0, 0.5);
        let moved = cam.with_world_transformed(&rot, &trans);
        let p = Vector3::new(0.2, -0.1, 0.3);
        let a = cam.project_point(&p).unwrap();
        let b = moved.project_point(&(rot * p + trans)).unwrap();
        assert!((a - b).norm() < 1e-9);
    }
}
