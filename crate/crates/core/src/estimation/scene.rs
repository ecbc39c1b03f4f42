use std::collections::BTreeMap;

use nalgebra::{DVector, SVector};
use rayon::prelude::*;

use crate::geometry::{compose_dual_quadric, EllipsoidParams};

use super::residual::view_residuals;
use super::{
    init_closed_form, init_from_centers, levenberg_marquardt, CameraMap, Detection, EstimationError,
    FitReport, InitMethod, LmOptions, ObjectId, SolverOptions, WeightMatrices,
};

/// A view prepared for fitting: detection, camera and inverse standard deviations.
struct View<'a> {
    det: &'a Detection,
    cam: &'a crate::geometry::Camera,
    inv_sigma: [f64; 6],
    inv_sigma_d: f64,
}

impl View<'_> {
    fn weighted_residuals(&self, dual: &crate::geometry::DualQuadric, with_divergence: bool, out: &mut Vec<f64>) -> Result<(), EstimationError> {
        let (r, d) = view_residuals(self.cam, dual, self.det, with_divergence)?;
        out.extend(r.iter().zip(&self.inv_sigma).map(|(r, w)| r * w));
        if with_divergence {
            out.push(d * self.inv_sigma_d);
        }
        Ok(())
    }
}

fn stacked_residuals(views: &[View<'_>], q: &EllipsoidParams, with_divergence: bool) -> Result<DVector<f64>, EstimationError> {
    let dual = compose_dual_quadric(q);
    let mut out = Vec::with_capacity(views.len() * 7);
    for v in views {
        v.weighted_residuals(&dual, with_divergence, &mut out)?;
    }
    Ok(DVector::from_vec(out))
}

/// Weighted nonlinear least-squares fit of one object:
/// `Σ_views d̂²/λ + rᵀ Λ⁻¹ r` over the nine ellipsoid parameters.
///
/// Views whose projection is invalid at `init` are dropped with a warning
/// (or fail the fit in strict mode). During the search, steps that make any
/// remaining view invalid are rejected.
pub fn fit_map(
    detections: &[Detection],
    cameras: &CameraMap,
    init: &EllipsoidParams,
    opts: &SolverOptions,
) -> Result<FitReport, EstimationError> {
    let mut sorted: Vec<&Detection> = detections.iter().collect();
    sorted.sort_by(|a, b| {
        (a.camera_id, a.object_id)
            .cmp(&(b.camera_id, b.object_id))
            .then_with(|| a.offsets.to_array().partial_cmp(&b.offsets.to_array()).unwrap_or(std::cmp::Ordering::Equal))
    });

    let init_dual = compose_dual_quadric(init);
    let mut views = Vec::with_capacity(sorted.len());
    let mut dropped = Vec::new();
    for det in sorted {
        let cam = cameras.get(&det.camera_id).ok_or(EstimationError::UnknownCamera(det.camera_id))?;
        let w = WeightMatrices::from_uncertainty(&det.unc);
        w.validate()?;
        let view = View {
            det,
            cam,
            inv_sigma: w.lambda.map(|v| 1.0 / v.sqrt()),
            inv_sigma_d: 1.0 / w.lambda_d.sqrt(),
        };
        let mut scratch = Vec::new();
        match view.weighted_residuals(&init_dual, opts.use_divergence, &mut scratch) {
            Ok(()) => views.push(view),
            Err(e) if opts.strict => return Err(e),
            Err(e) => {
                log::warn!("dropping camera {} for object {}: {e}", det.camera_id, det.object_id);
                dropped.push(det.camera_id);
            }
        }
    }
    if views.is_empty() {
        return Err(EstimationError::AllViewsDropped);
    }

    let residual_fn = |x: &SVector<f64, 9>| {
        let q = EllipsoidParams::from_vector(x.as_slice()).ok()?;
        let r = stacked_residuals(&views, &q, opts.use_divergence).ok()?;
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let lm_opts = LmOptions { max_iters: opts.max_iters, ..LmOptions::default() };
    let x0 = SVector::<f64, 9>::from_row_slice(&init.to_vector());
    let outcome = levenberg_marquardt(residual_fn, x0, &lm_opts).ok_or(EstimationError::DivergedFit)?;
    if !outcome.cost.is_finite() {
        return Err(EstimationError::DivergedFit);
    }
    let q_hat = EllipsoidParams::from_vector(outcome.x.as_slice())?;

    let dual = compose_dual_quadric(&q_hat);
    let per_view_residual_norms = views
        .iter()
        .map(|v| {
            let mut r = Vec::new();
            let norm = v
                .weighted_residuals(&dual, opts.use_divergence, &mut r)
                .map(|_| r.iter().map(|x| x * x).sum::<f64>().sqrt())
                .unwrap_or(f64::NAN);
            (v.det.camera_id, norm)
        })
        .collect();

    Ok(FitReport {
        q_hat,
        initial_cost: outcome.initial_cost,
        final_cost: outcome.cost,
        iterations: outcome.iterations,
        converged: outcome.converged,
        init: InitMethod::Given,
        per_view_residual_norms,
        dropped_views: dropped,
    })
}

/// Detections grouped by object, each group sorted by camera.
pub fn group_by_object(detections: &[Detection]) -> BTreeMap<ObjectId, Vec<Detection>> {
    let mut groups: BTreeMap<ObjectId, Vec<Detection>> = BTreeMap::new();
    for d in detections {
        groups.entry(d.object_id).or_default().push(*d);
    }
    for g in groups.values_mut() {
        g.sort_by_key(|d| d.camera_id);
    }
    groups
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneFit {
    pub reports: BTreeMap<ObjectId, FitReport>,
    pub failures: BTreeMap<ObjectId, EstimationError>,
}

/// Fits every object independently (in parallel).
///
/// Objects whose closed-form initialization fails are still fitted from a
/// coarse center-triangulation start, but their report has
/// `converged = false` and `init = CenterTriangulation`. Errors are collected
/// per object.
pub fn fit_scene(detections: &[Detection], cameras: &CameraMap, opts: &SolverOptions) -> SceneFit {
    let groups: Vec<(ObjectId, Vec<Detection>)> = group_by_object(detections).into_iter().collect();
    let results: Vec<(ObjectId, Result<FitReport, EstimationError>)> = groups
        .par_iter()
        .map(|(id, dets)| (*id, fit_object(dets, cameras, opts)))
        .collect();

    let mut fit = SceneFit::default();
    for (id, res) in results {
        match res {
            Ok(report) => {
                fit.reports.insert(id, report);
            }
            Err(e) => {
                fit.failures.insert(id, e);
            }
        }
    }
    fit
}

fn fit_object(dets: &[Detection], cameras: &CameraMap, opts: &SolverOptions) -> Result<FitReport, EstimationError> {
    match init_closed_form(dets, cameras) {
        Ok(init) => {
            let mut report = fit_map(dets, cameras, &init, opts)?;
            report.init = InitMethod::ClosedForm;
            Ok(report)
        }
        Err(err @ (EstimationError::UnknownCamera(_) | EstimationError::InvalidDetection(_))) => Err(err),
        Err(err) => {
            log::warn!("closed-form initialization failed for object {}: {err}", dets[0].object_id);
            let init = init_from_centers(dets, cameras).map_err(|_| err)?;
            let mut report = fit_map(dets, cameras, &init, opts)?;
            report.init = InitMethod::CenterTriangulation;
            report.converged = false;
            Ok(report)
        }
    }
}
