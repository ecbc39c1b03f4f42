//! Minimum-volume enclosing ellipsoid via Khachiyan's barycentric ascent.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};

use super::{decompose_dual_quadric, DualQuadric, EllipsoidParams, GeometryError};

pub const MVEE_DEFAULT_TOL: f64 = 1e-7;
pub const MVEE_MAX_ITERS: usize = 10_000;

/// Smallest ellipsoid containing every point.
///
/// Iterates until the barycentric weights move by less than `tol` (or the
/// iteration cap is hit), then inflates the result just enough that every input
/// point satisfies the ellipsoid inequality.
pub fn min_volume_enclosing_ellipsoid(points: &[Vector3<f64>], tol: f64) -> Result<EllipsoidParams, GeometryError> {
    if !(tol > 0.0) {
        return Err(GeometryError::DegenerateInput(format!("tolerance must be positive, got {tol}")));
    }
    let n = points.len();
    if n < 4 {
        return Err(GeometryError::DegenerateInput(format!("need at least 4 points, got {n}")));
    }
    if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(GeometryError::DegenerateInput("non-finite point".into()));
    }
    check_affine_rank(points)?;

    let d = 3.0;
    let lifted: Vec<Vector4<f64>> = points.iter().map(|p| Vector4::new(p.x, p.y, p.z, 1.0)).collect();
    let mut u = DVector::from_element(n, 1.0 / n as f64);

    for _ in 0..MVEE_MAX_ITERS {
        let mut x = Matrix4::zeros();
        for (q, &w) in lifted.iter().zip(u.iter()) {
            x += w * q * q.transpose();
        }
        let x_inv = x
            .try_inverse()
            .ok_or_else(|| GeometryError::DegenerateInput("singular moment matrix".into()))?;
        let (j, m_max) = lifted
            .iter()
            .map(|q| (q.transpose() * x_inv * q)[0])
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, m)| if m > best.1 { (i, m) } else { best });
        let step = (m_max - d - 1.0) / ((d + 1.0) * (m_max - 1.0));
        let mut next = &u * (1.0 - step);
        next[j] += step;
        let change = (&next - &u).norm();
        u = next;
        if change < tol {
            break;
        }
    }

    let center = points.iter().zip(u.iter()).fold(Vector3::zeros(), |acc, (p, &w)| acc + w * p);
    let mut scatter = Matrix3::zeros();
    for (p, &w) in points.iter().zip(u.iter()) {
        scatter += w * p * p.transpose();
    }
    // Shape matrix E with (x-c)ᵀ E⁻¹ (x-c) <= 1.
    let mut shape = d * (scatter - center * center.transpose());
    shape = 0.5 * (shape + shape.transpose());
    let shape_inv = shape
        .try_inverse()
        .ok_or_else(|| GeometryError::DegenerateInput("singular shape matrix".into()))?;
    let worst = points
        .iter()
        .map(|p| {
            let v = p - center;
            (v.transpose() * shape_inv * v)[0]
        })
        .fold(0.0f64, f64::max);
    if worst > 1.0 {
        shape *= worst;
    }

    let mut dual = Matrix4::zeros();
    dual.fixed_view_mut::<3, 3>(0, 0).copy_from(&(shape - center * center.transpose()));
    dual.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-center));
    dual.fixed_view_mut::<1, 3>(3, 0).copy_from(&(-center.transpose()));
    dual[(3, 3)] = -1.0;
    decompose_dual_quadric(&DualQuadric::from_matrix(dual)?)
}

fn check_affine_rank(points: &[Vector3<f64>]) -> Result<(), GeometryError> {
    let mean = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let centered = DMatrix::from_fn(points.len(), 3, |i, j| points[i][j] - mean[j]);
    let sv = centered.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= 1e-10 * max {
        return Err(GeometryError::DegenerateInput("points are affinely dependent (rank < 3)".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, UnitSphere};

    #[test]
    fn cube_corners_give_circumscribed_sphere() {
        let mut pts = Vec::new();
        for &x in &[-1.0, 1.0] {
            for &y in &[-1.0, 1.0] {
                for &z in &[-1.0, 1.0] {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        let e = min_volume_enclosing_ellipsoid(&pts, MVEE_DEFAULT_TOL).unwrap();
        let r = 3.0f64.sqrt();
        for s in e.s() {
            assert!((s - r).abs() / r < 1e-4);
        }
        assert!(e.center().norm() < 1e-4);
    }

    #[test]
    fn recovers_sampled_ellipsoid() {
        let truth = EllipsoidParams::new([0.4, -0.3, 1.1], [1.0, -2.0, 0.5], [3.0, 2.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rot = truth.rotation();
        let pts: Vec<Vector3<f64>> = (0..400)
            .map(|_| {
                let [x, y, z]: [f64; 3] = UnitSphere.sample(&mut rng);
                let local = Vector3::new(x * 3.0, y * 2.0, z * 1.0);
                // Mix in interior points, which must not affect the result.
                let k = if rng.random_bool(0.25) { rng.random_range(0.0..0.9) } else { 1.0 };
                rot * (k * local) + truth.center()
            })
            .collect();
        let e = min_volume_enclosing_ellipsoid(&pts, MVEE_DEFAULT_TOL).unwrap();
        for i in 0..3 {
            assert!((e.s()[i] - truth.s()[i]).abs() / truth.s()[i] < 1e-3, "{:?}", e.s());
        }
        assert!((e.center() - truth.center()).norm() < 1e-3 * 3.0);
        for p in &pts {
            assert!(e.contains(p) || {
                let local = e.rotation().inverse() * (p - e.center());
                (0..3).map(|i| (local[i] / e.s()[i]).powi(2)).sum::<f64>() <= 1.0 + 1e-9
            });
        }
    }

    #[test]
    fn degenerate_inputs() {
        let collinear = [Vector3::zeros(), Vector3::x(), 2.0 * Vector3::x()];
        assert!(matches!(
            min_volume_enclosing_ellipsoid(&collinear, MVEE_DEFAULT_TOL),
            Err(GeometryError::DegenerateInput(_))
        ));
        let planar = [Vector3::zeros(), Vector3::x(), Vector3::y(), Vector3::new(1.0, 1.0, 0.0)];
        assert!(matches!(
            min_volume_enclosing_ellipsoid(&planar, MVEE_DEFAULT_TOL),
            Err(GeometryError::DegenerateInput(_))
        ));
        let tetra = [Vector3::zeros(), Vector3::x(), Vector3::y(), Vector3::z()];
        assert!(min_volume_enclosing_ellipsoid(&tetra, 0.0).is_err());
        assert!(min_volume_enclosing_ellipsoid(&tetra, MVEE_DEFAULT_TOL).is_ok());
    }
}
