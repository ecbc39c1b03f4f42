//! Linear initialization of an ellipsoid from multi-view ellipses.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Vector3};

use crate::encoding::decode_offsets;
use crate::geometry::{decompose_dual_quadric, ellipse_to_dual_conic, DualQuadric, Ellipse, EllipsoidParams};

use super::{CameraMap, Detection, EstimationError};

/// Largest accepted ratio between the two smallest singular values.
pub const ILL_CONDITIONED_RATIO: f64 = 0.5;

/// Upper-triangle index pairs of a symmetric 3×3 / 4×4 matrix.
const VECH3: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
const VECH4: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

fn decoded_views<'a>(
    detections: &'a [Detection],
    cameras: &CameraMap,
) -> Result<Vec<(&'a Detection, Ellipse)>, EstimationError> {
    detections
        .iter()
        .map(|d| {
            if !cameras.contains_key(&d.camera_id) {
                return Err(EstimationError::UnknownCamera(d.camera_id));
            }
            Ok((d, decode_offsets(&d.offsets, &d.ref_square)?))
        })
        .collect()
}

/// Maps `vech(Q*)` to `vech(P Q* Pᵀ)`.
fn projection_rows(p: &Matrix3x4<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(6, 10, |row, col| {
        let (a, b) = VECH3[row];
        let (c, d) = VECH4[col];
        if c == d {
            p[(a, c)] * p[(b, c)]
        } else {
            p[(a, c)] * p[(b, d)] + p[(a, d)] * p[(b, c)]
        }
    })
}

/// Solves `vech(C*_i) ∝ G_i vech(Q*)` for all views jointly.
///
/// Every view is preconditioned by the similarity that centers its ellipse and
/// scales it to unit size. Each view adds one unknown scale `λ_i`, and the
/// stacked system `[G_i | -c_i e_iᵀ] [vech(Q*); λ] = 0` (with `G_i` and `c_i`
/// at unit Frobenius norm) is solved by the right singular vector of the
/// smallest singular value.
pub fn init_closed_form(detections: &[Detection], cameras: &CameraMap) -> Result<EllipsoidParams, EstimationError> {
    let distinct: BTreeSet<_> = detections.iter().map(|d| d.camera_id).collect();
    if distinct.len() < 3 {
        return Err(EstimationError::InsufficientViews(distinct.len()));
    }
    let views = decoded_views(detections, cameras)?;
    let n = views.len();
    let mut system = DMatrix::zeros(6 * n, 10 + n);

    for (i, (det, ellipse)) in views.iter().enumerate() {
        let cam = &cameras[&det.camera_id];
        let size = ellipse.a().hypot(ellipse.b());
        let h = Matrix3::new(
            1.0 / size,
            0.0,
            -ellipse.x() / size,
            0.0,
            1.0 / size,
            -ellipse.y() / size,
            0.0,
            0.0,
            1.0,
        );
        let conic = h * ellipse_to_dual_conic(ellipse).matrix() * h.transpose();
        let p = h * cam.projection_matrix();

        let mut g = projection_rows(&p);
        g /= g.norm();
        let mut c = nalgebra::DVector::from_iterator(6, VECH3.iter().map(|&(a, b)| conic[(a, b)]));
        c /= c.norm();

        system.view_mut((6 * i, 0), (6, 10)).copy_from(&g);
        system.view_mut((6 * i, 10 + i), (6, 1)).copy_from(&(-c));
    }

    let svd = system.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let (smallest, second) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    let ratio = if second > 0.0 { smallest / second } else { 1.0 };
    if ratio > ILL_CONDITIONED_RATIO {
        return Err(EstimationError::IllConditioned(ratio));
    }

    let w = v_t.row(order[0]);
    let mut q = Matrix4::zeros();
    for (k, &(a, b)) in VECH4.iter().enumerate() {
        q[(a, b)] = w[k];
        q[(b, a)] = w[k];
    }
    Ok(decompose_dual_quadric(&DualQuadric::from_matrix(q)?)?)
}

/// Coarse fallback: a sphere at the triangulated ellipse centers, sized by
/// back-projecting the mean ellipse radius.
pub fn init_from_centers(detections: &[Detection], cameras: &CameraMap) -> Result<EllipsoidParams, EstimationError> {
    let views = decoded_views(detections, cameras)?;
    if views.len() < 2 {
        return Err(EstimationError::InsufficientViews(views.len()));
    }
    let mut a = DMatrix::zeros(2 * views.len(), 4);
    for (i, (det, e)) in views.iter().enumerate() {
        let p = cameras[&det.camera_id].projection_matrix();
        for k in 0..4 {
            a[(2 * i, k)] = e.x() * p[(2, k)] - p[(0, k)];
            a[(2 * i + 1, k)] = e.y() * p[(2, k)] - p[(1, k)];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let idx = svd.singular_values.imin();
    let h = v_t.row(idx);
    if h[3].abs() < 1e-12 {
        return Err(EstimationError::IllConditioned(1.0));
    }
    let center = Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);

    let mut radius = 0.0;
    for (det, e) in &views {
        let cam = &cameras[&det.camera_id];
        let depth = cam.depth_of(&center);
        if depth <= 0.0 {
            return Err(EstimationError::Geometry(crate::geometry::GeometryError::BehindCamera(depth)));
        }
        let f = 0.5 * (cam.intrinsics().fx + cam.intrinsics().fy);
        radius += (e.a() * e.b()).sqrt() * depth / f;
    }
    radius /= views.len() as f64;
    Ok(EllipsoidParams::axis_aligned([center.x, center.y, center.z], [radius; 3])?)
}
