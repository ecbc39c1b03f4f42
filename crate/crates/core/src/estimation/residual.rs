//! Sensor models: predicted offsets and divergence of a projected ellipsoid.

use crate::encoding::{encode_offsets_unchecked, offsets_to_normalized_ellipse, rectify_angle, EllipseOffsets};
use crate::geometry::{
    compose_dual_quadric, dual_conic_to_ellipse, project_dual_quadric, Camera, DualQuadric, Ellipse, EllipsoidParams,
};
use crate::uncertainty::{ellipse_to_gaussian, gaussian_kl, THETA_INDEX};

use super::{Detection, EstimationError};

pub fn projected_ellipse(cam: &Camera, q: &EllipsoidParams) -> Result<Ellipse, EstimationError> {
    project_ellipse_of(cam, &compose_dual_quadric(q))
}

pub(super) fn project_ellipse_of(cam: &Camera, dual: &DualQuadric) -> Result<Ellipse, EstimationError> {
    Ok(dual_conic_to_ellipse(&project_dual_quadric(dual, cam)?)?)
}

/// Offsets of the projected ellipsoid against the detection's reference square.
pub fn projected_offsets(cam: &Camera, q: &EllipsoidParams, det: &Detection) -> Result<EllipseOffsets, EstimationError> {
    Ok(encode_offsets_unchecked(&projected_ellipse(cam, q)?, &det.ref_square)?)
}

/// Detected minus predicted offsets, with the orientation component folded.
pub fn offset_residual(cam: &Camera, q: &EllipsoidParams, det: &Detection) -> Result<[f64; 6], EstimationError> {
    let (r, _) = view_residuals(cam, &compose_dual_quadric(q), det, false)?;
    Ok(r)
}

/// `KL(detected ‖ projected)` between the two ellipses normalized by the
/// detection's reference square.
pub fn divergence_residual(cam: &Camera, q: &EllipsoidParams, det: &Detection) -> Result<f64, EstimationError> {
    let (_, d) = view_residuals(cam, &compose_dual_quadric(q), det, true)?;
    Ok(d)
}

/// Raw offset residual and (optionally) divergence for one view.
pub(super) fn view_residuals(
    cam: &Camera,
    dual: &DualQuadric,
    det: &Detection,
    with_divergence: bool,
) -> Result<([f64; 6], f64), EstimationError> {
    let predicted = encode_offsets_unchecked(&project_ellipse_of(cam, dual)?, &det.ref_square)?;
    let detected = det.offsets.to_array();
    let tau = predicted.to_array();
    let mut r = [0.0; 6];
    for k in 0..6 {
        r[k] = if k == THETA_INDEX { rectify_angle(detected[k], tau[k]) } else { detected[k] - tau[k] };
    }
    let d = if with_divergence {
        let g = ellipse_to_gaussian(&offsets_to_normalized_ellipse(&det.offsets)?);
        let p = ellipse_to_gaussian(&offsets_to_normalized_ellipse(&predicted)?);
        gaussian_kl(&g, &p)?
    } else {
        0.0
    };
    Ok((r, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_offsets, RefSquare};
    use crate::geometry::Intrinsics;
    use crate::uncertainty::DetectionUncertainty;
    use nalgebra::{Matrix2, Vector2, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn camera(eye: Vector3<f64>) -> Camera {
        Camera::look_at(Intrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0 }, &eye, &Vector3::zeros(), &Vector3::z())
            .unwrap()
    }

    fn object() -> EllipsoidParams {
        EllipsoidParams::new([0.3, 0.2, -0.4], [0.1, -0.1, 0.2], [0.5, 0.3, 0.2]).unwrap()
    }

    fn detection_from(e: &Ellipse, s: f64, shift: Vector2<f64>) -> Detection {
        let q = RefSquare::new(e.x() + shift.x, e.y() + shift.y, s * e.enclosing_square_side()).unwrap();
        Detection {
            object_id: 0,
            camera_id: 0,
            offsets: encode_offsets(e, &q).unwrap(),
            ref_square: q,
            unc: DetectionUncertainty::uniform(0.0),
        }
    }

    #[test]
    fn self_consistent_detection_has_zero_residual() {
        let q = object();
        for eye in [Vector3::new(4.0, 0.0, 1.0), Vector3::new(-2.0, 3.0, 2.0), Vector3::new(0.5, -4.0, 0.5)] {
            let cam = camera(eye);
            let e = projected_ellipse(&cam, &q).unwrap();
            let det = detection_from(&e, 0.6, Vector2::new(3.0, -2.0));
            let r = offset_residual(&cam, &q, &det).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-9), "{r:?}");
            assert!(divergence_residual(&cam, &q, &det).unwrap() < 1e-12);
        }
    }

    #[test]
    fn angle_component_folds() {
        let q = object();
        let cam = camera(Vector3::new(4.0, 0.0, 1.0));
        let e = projected_ellipse(&cam, &q).unwrap();
        let mut det = detection_from(&e, 0.8, Vector2::zeros());
        let r0 = offset_residual(&cam, &q, &det).unwrap();
        det.offsets.dtheta += 1.0;
        let r1 = offset_residual(&cam, &q, &det).unwrap();
        assert!((r0[4] - r1[4]).abs() < 1e-12);
    }

    #[test]
    fn divergence_grows_with_center_shift() {
        let q = object();
        let cam = camera(Vector3::new(3.0, 2.0, 1.0));
        let e = projected_ellipse(&cam, &q).unwrap();
        let mut last = -1.0;
        for k in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let moved = Ellipse::new(e.x() + 0.6 * k, e.y() - 0.8 * k, e.a(), e.b(), e.theta()).unwrap();
            let q_sq = RefSquare::new(e.x(), e.y(), 0.7 * e.enclosing_square_side()).unwrap();
            let det = Detection {
                object_id: 0,
                camera_id: 0,
                offsets: encode_offsets(&moved, &q_sq).unwrap(),
                ref_square: q_sq,
                unc: DetectionUncertainty::uniform(0.0),
            };
            let d = divergence_residual(&cam, &q, &det).unwrap();
            assert!(d > last);
            last = d;
        }
    }

    /// Independent transcription: normalize both ellipses by the square, build
    /// covariances from explicit rotation matrices, and evaluate the KL.
    fn kl_oracle(detected: &Ellipse, projected: &Ellipse, sq: &RefSquare) -> f64 {
        let gauss = |e: &Ellipse| {
            let mu = Vector2::new((e.x() - sq.qx) / sq.ql, (e.y() - sq.qy) / sq.ql);
            let (s, c) = e.theta().sin_cos();
            let t = Matrix2::new(c, -s, s, c);
            let l = Matrix2::new((e.a() / sq.ql).powi(2), 0.0, 0.0, (e.b() / sq.ql).powi(2));
            (mu, t * l * t.try_inverse().unwrap())
        };
        let (mg, sg) = gauss(detected);
        let (mp, sp) = gauss(projected);
        let spi = sp.try_inverse().unwrap();
        let dm = mp - mg;
        0.5 * (spi * sg).trace() + 0.5 * (dm.transpose() * spi * dm)[0] - 1.0 + 0.5 * (sp.determinant() / sg.determinant()).ln()
    }

    #[test]
    fn divergence_matches_independent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = object();
        for _ in 0..100 {
            let eye = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.5..3.0));
            if eye.xy().norm() < 2.0 {
                continue;
            }
            let cam = camera(eye);
            let e = projected_ellipse(&cam, &q).unwrap();
            let detected = Ellipse::new(
                e.x() + rng.random_range(-5.0..5.0),
                e.y() + rng.random_range(-5.0..5.0),
                e.a() * rng.random_range(0.8..1.2),
                e.b() * rng.random_range(0.8..1.2),
                e.theta() + rng.random_range(-0.3..0.3),
            )
            .unwrap();
            let sq = RefSquare::new(e.x(), e.y(), 0.5 * detected.enclosing_square_side()).unwrap();
            let det = Detection {
                object_id: 0,
                camera_id: 0,
                offsets: encode_offsets(&detected, &sq).unwrap(),
                ref_square: sq,
                unc: DetectionUncertainty::uniform(0.0),
            };
            let d = divergence_residual(&cam, &q, &det).unwrap();
            let oracle = kl_oracle(&detected, &e, &sq);
            assert!((d - oracle).abs() < 1e-9 * oracle.max(1.0), "{d} vs {oracle}");
        }
    }
}
