//! Evaluation metrics: volumetric IoU, major-axis angle and centroid distance.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimation::ObjectId;
use crate::geometry::{Ellipse, EllipsoidParams};

pub const DEFAULT_IOU_SAMPLES: usize = 100_000;
/// Two semi-axes closer than this make the major axis ambiguous.
pub const AXIS_TIE_TOL: f64 = 1e-9;

const CHUNK: usize = 8192;

/// Monte-Carlo IoU with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouEstimate {
    pub iou: f64,
    pub stderr: f64,
}

/// Counts `(in both, in either)` over `n` points drawn uniformly from a box.
///
/// Points are drawn in fixed-size chunks, each from its own ChaCha stream, so
/// the result does not depend on the number of threads.
fn count_box<const D: usize>(
    lo: [f64; D],
    hi: [f64; D],
    n: usize,
    seed: u64,
    inside: impl Fn(&[f64; D]) -> (bool, bool) + Sync,
) -> (usize, usize) {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let (mut both, mut either) = (0, 0);
            for _ in 0..len {
                let p: [f64; D] = std::array::from_fn(|i| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>());
                let (a, b) = inside(&p);
                both += (a && b) as usize;
                either += (a || b) as usize;
            }
            (both, either)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1))
}

fn estimate(both: usize, either: usize) -> IouEstimate {
    if either == 0 {
        return IouEstimate { iou: 0.0, stderr: 0.0 };
    }
    let p = both as f64 / either as f64;
    IouEstimate { iou: p, stderr: (p * (1.0 - p) / either as f64).sqrt() }
}

/// Volumetric IoU sampled uniformly in the bounding box of both ellipsoids.
pub fn o3d(a: &EllipsoidParams, b: &EllipsoidParams, n_samples: usize, seed: u64) -> IouEstimate {
    let (ca, ea) = (a.center(), a.aabb_half_extent());
    let (cb, eb) = (b.center(), b.aabb_half_extent());
    let lo: [f64; 3] = std::array::from_fn(|i| (ca[i] - ea[i]).min(cb[i] - eb[i]));
    let hi: [f64; 3] = std::array::from_fn(|i| (ca[i] + ea[i]).max(cb[i] + eb[i]));
    let inv = |q: &EllipsoidParams| -> Matrix3<f64> {
        let r = q.rotation().into_inner();
        let s = q.s();
        r * Matrix3::from_diagonal(&Vector3::new(s[0].powi(-2), s[1].powi(-2), s[2].powi(-2))) * r.transpose()
    };
    let (ia, ib) = (inv(a), inv(b));
    let (both, either) = count_box(lo, hi, n_samples, seed, |p| {
        let p = Vector3::from(*p);
        let (da, db) = (p - ca, p - cb);
        (da.dot(&(ia * da)) <= 1.0, db.dot(&(ib * db)) <= 1.0)
    });
    estimate(both, either)
}

/// Area IoU of two ellipses, sampled like [`o3d`].
pub fn ellipse_iou_2d(a: &Ellipse, b: &Ellipse, n_samples: usize, seed: u64) -> IouEstimate {
    let half = |e: &Ellipse| {
        let (s, c) = e.theta().sin_cos();
        Vector2::new((e.a() * c).hypot(e.b() * s), (e.a() * s).hypot(e.b() * c))
    };
    let inv = |e: &Ellipse| {
        let (s, c) = e.theta().sin_cos();
        let r = Matrix2::new(c, -s, s, c);
        r * Matrix2::new(e.a().powi(-2), 0.0, 0.0, e.b().powi(-2)) * r.transpose()
    };
    let (ca, cb) = (a.center(), b.center());
    let (ha, hb) = (half(a), half(b));
    let lo: [f64; 2] = std::array::from_fn(|i| (ca[i] - ha[i]).min(cb[i] - hb[i]));
    let hi: [f64; 2] = std::array::from_fn(|i| (ca[i] + ha[i]).max(cb[i] + hb[i]));
    let (ia, ib) = (inv(a), inv(b));
    let (both, either) = count_box(lo, hi, n_samples, seed, |p| {
        let p = Vector2::from(*p);
        let (da, db) = (p - ca, p - cb);
        (da.dot(&(ia * da)) <= 1.0, db.dot(&(ib * db)) <= 1.0)
    });
    estimate(both, either)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    /// Angle between the major axes in `[0, 90]` degrees; `0` when ambiguous.
    pub degrees: f64,
    /// Either ellipsoid has two largest semi-axes within [`AXIS_TIE_TOL`].
    pub ambiguous: bool,
}

fn major_axis(q: &EllipsoidParams) -> (Vector3<f64>, bool) {
    let s = q.s();
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let tie = (s[order[0]] - s[order[1]]).abs() <= AXIS_TIE_TOL;
    (q.rotation().into_inner().column(order[0]).into_owned(), tie)
}

pub fn axis_angle_error(a: &EllipsoidParams, b: &EllipsoidParams) -> AxisAngle {
    let (ua, tie_a) = major_axis(a);
    let (ub, tie_b) = major_axis(b);
    if tie_a || tie_b {
        return AxisAngle { degrees: 0.0, ambiguous: true };
    }
    // atan2 of |cross| and |dot| stays accurate near 0° and 90°.
    let degrees = ua.cross(&ub).norm().atan2(ua.dot(&ub).abs()).to_degrees();
    AxisAngle { degrees, ambiguous: false }
}

pub fn position_error(a: &EllipsoidParams, b: &EllipsoidParams) -> f64 {
    (a.center() - b.center()).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetrics {
    pub object_id: ObjectId,
    pub o3d: f64,
    pub o3d_stderr: f64,
    pub axis_angle_deg: f64,
    pub position_error: f64,
    pub ambiguous_axis: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Arithmetic mean of every per-object column.
    pub o3d: f64,
    pub o3d_stderr: f64,
    pub axis_angle_deg: f64,
    pub position_error: f64,
    pub per_object: Vec<ObjectMetrics>,
    /// Ground-truth objects without an estimate.
    pub missing: Vec<ObjectId>,
}

/// Scores every estimated object against its ground truth. Objects are
/// sampled with seeds derived from `seed` and their id.
pub fn evaluate(
    ground_truth: &BTreeMap<ObjectId, EllipsoidParams>,
    estimates: &BTreeMap<ObjectId, EllipsoidParams>,
    n_samples: usize,
    seed: u64,
) -> EvalResult {
    let mut per_object = Vec::new();
    let mut missing = Vec::new();
    for (&id, gt) in ground_truth {
        let Some(est) = estimates.get(&id) else {
            missing.push(id);
            continue;
        };
        let iou = o3d(gt, est, n_samples, seed ^ u64::from(id).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let axis = axis_angle_error(gt, est);
        per_object.push(ObjectMetrics {
            object_id: id,
            o3d: iou.iou,
            o3d_stderr: iou.stderr,
            axis_angle_deg: axis.degrees,
            position_error: position_error(gt, est),
            ambiguous_axis: axis.ambiguous,
        });
    }
    let n = per_object.len().max(1) as f64;
    let mean = |f: fn(&ObjectMetrics) -> f64| per_object.iter().map(f).sum::<f64>() / n;
    EvalResult {
        o3d: mean(|m| m.o3d),
        o3d_stderr: mean(|m| m.o3d_stderr),
        axis_angle_deg: mean(|m| m.axis_angle_deg),
        position_error: mean(|m| m.position_error),
        per_object,
        missing,
    }
}
