//! Synthetic scenes and a simulated detector with occlusion-dependent noise.
//!
//! Occlusion is modelled by a reference square smaller than the full-object
//! square (visibility `s < 1`) and by inflating the offset noise as
//! `σ_k = base_k · s^(-γ)`. Every detection carries the log-variances of the
//! noise that produced it.

use std::collections::BTreeMap;

use nalgebra::{UnitQuaternion, Vector3, Vector4};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{encode_offsets, offsets_to_normalized_ellipse, EllipseOffsets, RefSquare};
use crate::estimation::{projected_ellipse, CameraId, CameraMap, Detection, ObjectId};
use crate::geometry::{Camera, Ellipse, EllipsoidParams, GeometryError, Intrinsics};
use crate::uncertainty::{ellipse_to_gaussian, gaussian_kl, DetectionUncertainty};

/// Smallest standard deviation written to a detection, so noiseless
/// detections still carry finite log-variances.
pub const SIGMA_FLOOR: f64 = 1e-3;
/// Monte-Carlo draws used to calibrate the observation uncertainty.
pub const CALIBRATION_SAMPLES: usize = 10_000;
/// Noisy offsets implying a visibility below this are redrawn.
pub const MIN_NOISY_VISIBILITY: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_objects: usize,
    /// Range of every semi-axis.
    pub scale_range: [f64; 2],
    pub workspace_min: [f64; 3],
    pub workspace_max: [f64; 3],
    pub n_cameras: usize,
    pub ring_radius: f64,
    /// Camera height above the workspace center.
    pub ring_height: f64,
    pub intrinsics: Intrinsics,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_objects: 1,
            scale_range: [0.15, 0.5],
            workspace_min: [-0.5, -0.5, -0.25],
            workspace_max: [0.5, 0.5, 0.25],
            n_cameras: 8,
            ring_radius: 4.0,
            ring_height: 1.5,
            intrinsics: Intrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0 },
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |msg: String| Err(SimulationError::InvalidConfig(msg));
        if self.n_objects == 0 || self.n_cameras == 0 {
            return bad("n_objects and n_cameras must be at least 1".into());
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("scale_range {:?} must satisfy 0 < min <= max", self.scale_range));
        }
        if (0..3).any(|i| !(self.workspace_min[i] <= self.workspace_max[i])) {
            return bad("workspace_min must not exceed workspace_max".into());
        }
        let reach = self.workspace_center().xy().metric_distance(&Vector3::from(self.workspace_max).xy()) + hi;
        if !(self.ring_radius > reach) {
            return bad(format!("ring_radius {} must exceed the largest object extent {reach}", self.ring_radius));
        }
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0) {
            return bad("focal lengths must be positive".into());
        }
        Ok(())
    }

    fn workspace_center(&self) -> Vector3<f64> {
        0.5 * (Vector3::from(self.workspace_min) + Vector3::from(self.workspace_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Offset-scale standard deviations of `(dx, dy, da, db, dtheta, ds)` at full visibility.
    pub base_sigma: [f64; 6],
    /// `γ` in `σ = base · s^(-γ)`.
    pub occlusion_exponent: f64,
    pub visibility_range: [f64; 2],
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { base_sigma: [0.02; 6], occlusion_exponent: 1.0, visibility_range: [0.3, 1.0] }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { base_sigma: [0.0; 6], ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.base_sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(SimulationError::InvalidConfig(format!("base_sigma {:?} must be finite and >= 0", self.base_sigma)));
        }
        if !(self.occlusion_exponent >= 0.0 && self.occlusion_exponent.is_finite()) {
            return Err(SimulationError::InvalidConfig("occlusion_exponent must be >= 0".into()));
        }
        let [lo, hi] = self.visibility_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(SimulationError::InvalidConfig(format!(
                "visibility_range {:?} must lie in (0, 1] with min <= max",
                self.visibility_range
            )));
        }
        Ok(())
    }

    /// Offset standard deviations at visibility `s`.
    pub fn sigma_at(&self, s: f64) -> [f64; 6] {
        let inflation = s.powf(-self.occlusion_exponent);
        self.base_sigma.map(|b| b * inflation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: BTreeMap<ObjectId, EllipsoidParams>,
    pub cameras: CameraMap,
}

impl Scene {
    /// Every `k`-th camera in id order.
    pub fn every_kth_camera(&self, k: usize) -> CameraMap {
        self.cameras.iter().step_by(k.max(1)).map(|(id, c)| (*id, *c)).collect()
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    loop {
        let v = Vector4::from_fn(|_, _| StandardNormal.sample(rng));
        if v.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(v));
        }
    }
}

/// Objects uniform in the workspace with uniformly random orientation, and a
/// ring of cameras looking at the workspace center.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene, SimulationError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut objects = BTreeMap::new();
    for id in 0..cfg.n_objects {
        let t: [f64; 3] = std::array::from_fn(|i| sample_range(&mut rng, cfg.workspace_min[i], cfg.workspace_max[i]));
        let s: [f64; 3] = std::array::from_fn(|_| sample_range(&mut rng, cfg.scale_range[0], cfg.scale_range[1]));
        let (roll, pitch, yaw) = random_rotation(&mut rng).euler_angles();
        objects.insert(id as ObjectId, EllipsoidParams::new([yaw, pitch, roll], t, s)?);
    }

    let center = cfg.workspace_center();
    let mut cameras = CameraMap::new();
    for i in 0..cfg.n_cameras {
        let phi = std::f64::consts::TAU * i as f64 / cfg.n_cameras as f64;
        let eye = center + Vector3::new(cfg.ring_radius * phi.cos(), cfg.ring_radius * phi.sin(), cfg.ring_height);
        cameras.insert(i as CameraId, Camera::look_at(cfg.intrinsics, &eye, &center, &Vector3::z())?);
    }
    Ok(Scene { objects, cameras })
}

fn sample_range(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Adds `N(0, σ_k²)` noise to each offset. The visibility offset is redrawn
/// while it implies a visibility below [`MIN_NOISY_VISIBILITY`].
fn perturb(clean: &EllipseOffsets, sigma: &[f64; 6], rng: &mut ChaCha8Rng) -> EllipseOffsets {
    let mut v = clean.to_array();
    for k in 0..5 {
        v[k] += sigma[k] * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    }
    let mut ds = clean.ds;
    for _ in 0..100 {
        ds = clean.ds + sigma[5] * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        if 2.0 * ds.exp() - 1.0 >= MIN_NOISY_VISIBILITY {
            break;
        }
        ds = clean.ds;
    }
    v[5] = ds;
    EllipseOffsets::from_array(v)
}

/// Log of the mean divergence between noisy and clean offsets, estimated
/// from [`CALIBRATION_SAMPLES`] draws.
fn calibrate_observation_alpha(clean: &EllipseOffsets, sigma: &[f64; 6], rng: &mut ChaCha8Rng) -> f64 {
    let floor = SIGMA_FLOOR * SIGMA_FLOOR;
    let Ok(target) = offsets_to_normalized_ellipse(clean).map(|e| ellipse_to_gaussian(&e)) else {
        return floor.ln();
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    for _ in 0..CALIBRATION_SAMPLES {
        let noisy = perturb(clean, sigma, rng);
        let Ok(e) = offsets_to_normalized_ellipse(&noisy) else { continue };
        if let Ok(d) = gaussian_kl(&ellipse_to_gaussian(&e), &target) {
            sum += d;
            n += 1;
        }
    }
    let mean = if n > 0 { sum / n as f64 } else { 0.0 };
    mean.max(floor).ln()
}

/// A point uniformly distributed inside `e` shrunk by one half.
fn point_in_core(e: &Ellipse, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let r = 0.5 * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let (u, v) = (r * e.a() * phi.cos(), r * e.b() * phi.sin());
    let (s, c) = e.theta().sin_cos();
    (e.x() + c * u - s * v, e.y() + s * u + c * v)
}

/// Simulated detections of every object in every camera that sees it.
///
/// Output is sorted by `(object_id, camera_id)` and depends only on the
/// arguments.
pub fn render_detections(scene: &Scene, noise: &NoiseModel, seed: u64) -> Result<Vec<Detection>, SimulationError> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (&object_id, q) in &scene.objects {
        for (&camera_id, cam) in &scene.cameras {
            // Draw the per-pair randomness up front so skipped pairs do not
            // shift the stream of later ones.
            let pair_seed: u64 = rng.random();
            let ellipse = match projected_ellipse(cam, q) {
                Ok(e) => e,
                Err(err) => {
                    log::debug!("object {object_id} not visible in camera {camera_id}: {err}");
                    continue;
                }
            };
            let mut pair_rng = ChaCha8Rng::seed_from_u64(pair_seed);
            let [lo, hi] = noise.visibility_range;
            let s = sample_range(&mut pair_rng, lo, hi);
            let (qx, qy) = point_in_core(&ellipse, &mut pair_rng);
            let ref_square = RefSquare::new(qx, qy, s * ellipse.enclosing_square_side())
                .map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
            let clean = encode_offsets(&ellipse, &ref_square).map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
            let sigma = noise.sigma_at(s);
            let offsets = perturb(&clean, &sigma, &mut pair_rng);
            let alpha = sigma.map(|v| 2.0 * v.max(SIGMA_FLOOR).ln());
            let d = calibrate_observation_alpha(&clean, &sigma, &mut pair_rng);
            out.push(Detection {
                object_id,
                camera_id,
                offsets,
                ref_square,
                unc: DetectionUncertainty {
                    x: alpha[0],
                    y: alpha[1],
                    a: alpha[2],
                    b: alpha[3],
                    theta: alpha[4],
                    s: alpha[5],
                    d,
                },
            });
        }
    }
    Ok(out)
}

/// How detection uncertainties are presented to the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyMode {
    /// The simulator's true log-variances.
    Oracle,
    /// Every log-variance set to zero: an unweighted fit.
    Identity,
    /// True log-variances permuted across detections.
    Shuffled,
}

pub fn corrupt_uncertainties(detections: &[Detection], mode: UncertaintyMode, seed: u64) -> Vec<Detection> {
    let mut out = detections.to_vec();
    match mode {
        UncertaintyMode::Oracle => {}
        UncertaintyMode::Identity => {
            for d in &mut out {
                d.unc = DetectionUncertainty::uniform(0.0);
            }
        }
        UncertaintyMode::Shuffled => {
            let mut uncs: Vec<DetectionUncertainty> = out.iter().map(|d| d.unc).collect();
            uncs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            for (d, u) in out.iter_mut().zip(uncs) {
                d.unc = u;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::decode_offsets;

    fn scene(seed: u64) -> Scene {
        generate_scene(&SceneConfig { n_objects: 3, seed, ..SceneConfig::default() }).unwrap()
    }

    #[test]
    fn single_object_is_in_front_of_every_camera() {
        let s = generate_scene(&SceneConfig::default()).unwrap();
        assert_eq!((s.objects.len(), s.cameras.len()), (1, 8));
        let q = &s.objects[&0];
        for cam in s.cameras.values() {
            assert!(cam.depth_of(&q.center()) > 0.0);
        }
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(scene(5), scene(5));
        assert_ne!(scene(5), scene(6));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            SceneConfig { n_objects: 0, ..SceneConfig::default() },
            SceneConfig { n_cameras: 0, ..SceneConfig::default() },
            SceneConfig { ring_radius: 0.5, ..SceneConfig::default() },
            SceneConfig { scale_range: [0.5, 0.1], ..SceneConfig::default() },
        ];
        for cfg in bad {
            assert!(generate_scene(&cfg).is_err(), "{cfg:?}");
        }
        assert!(NoiseModel { visibility_range: [0.0, 1.0], ..NoiseModel::default() }.validate().is_err());
        assert!(NoiseModel { base_sigma: [-1.0; 6], ..NoiseModel::default() }.validate().is_err());
    }

    #[test]
    fn noiseless_detections_decode_to_projections() {
        let sc = scene(1);
        for gamma in [0.0, 1.0, 3.0] {
            let noise = NoiseModel { occlusion_exponent: gamma, ..NoiseModel::noiseless() };
            let dets = render_detections(&sc, &noise, 9).unwrap();
            assert_eq!(dets.len(), 3 * 8);
            for d in &dets {
                let e = decode_offsets(&d.offsets, &d.ref_square).unwrap();
                let gt = projected_ellipse(&sc.cameras[&d.camera_id], &sc.objects[&d.object_id]).unwrap();
                let err = [e.x() - gt.x(), e.y() - gt.y(), e.a() - gt.a(), e.b() - gt.b(), e.theta() - gt.theta()];
                assert!(err.iter().all(|v| v.abs() < 1e-9), "{err:?}");
                assert!(d.unc.is_finite());
            }
        }
    }

    #[test]
    fn homoscedastic_limit() {
        let noise = NoiseModel { occlusion_exponent: 0.0, ..NoiseModel::default() };
        let dets = render_detections(&scene(2), &noise, 3).unwrap();
        let first = dets[0].unc.offset_alphas();
        assert!(dets.iter().all(|d| d.unc.offset_alphas() == first));
    }

    #[test]
    fn rendering_is_deterministic() {
        let sc = scene(3);
        let noise = NoiseModel::default();
        let a = render_detections(&sc, &noise, 11).unwrap();
        assert_eq!(a, render_detections(&sc, &noise, 11).unwrap());
        assert_ne!(a, render_detections(&sc, &noise, 12).unwrap());
    }

    #[test]
    fn alphas_match_the_noise_law() {
        let noise = NoiseModel::default();
        for d in render_detections(&scene(4), &noise, 5).unwrap() {
            let s = d.ref_square.ql / {
                let sc = scene(4);
                projected_ellipse(&sc.cameras[&d.camera_id], &sc.objects[&d.object_id]).unwrap().enclosing_square_side()
            };
            let expected = 2.0 * (0.02 / s).ln();
            assert!((d.unc.x - expected).abs() < 1e-9);
            assert!(d.unc.d.is_finite());
        }
    }

    /// Noise statistics at a fixed visibility, checked against the law directly.
    #[test]
    fn empirical_noise_matches_the_law_and_is_unbiased() {
        let noise = NoiseModel { base_sigma: [0.02, 0.03, 0.01, 0.01, 0.02, 0.01], ..NoiseModel::default() };
        let s = 0.4;
        let sigma = noise.sigma_at(s);
        let clean = EllipseOffsets { dx: 0.1, dy: -0.05, da: -0.3, db: -0.9, dtheta: 0.2, ds: ((s + 1.0) / 2.0f64).ln() };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let draws: Vec<[f64; 6]> = (0..n).map(|_| perturb(&clean, &sigma, &mut rng).to_array()).collect();
        let c = clean.to_array();
        for k in 0..6 {
            let resid: Vec<f64> = draws.iter().map(|d| d[k] - c[k]).collect();
            let mean = resid.iter().sum::<f64>() / n as f64;
            let std = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            assert!((std / (noise.base_sigma[k] / s) - 1.0).abs() < 0.05, "k={k} std={std}");
            assert!(mean.abs() < 3.0 * std / (n as f64).sqrt(), "k={k} mean={mean}");
        }
    }

    #[test]
    fn uncertainty_modes() {
        let dets = render_detections(&scene(6), &NoiseModel::default(), 1).unwrap();
        assert_eq!(corrupt_uncertainties(&dets, UncertaintyMode::Oracle, 0), dets);

        let identity = corrupt_uncertainties(&dets, UncertaintyMode::Identity, 0);
        for d in &identity {
            let v = d.weights().lambda;
            assert!(v.iter().all(|x| *x == v[0]));
        }

        let shuffled = corrupt_uncertainties(&dets, UncertaintyMode::Shuffled, 4);
        let mut before: Vec<String> = dets.iter().map(|d| format!("{:?}", d.unc)).collect();
        let mut after: Vec<String> = shuffled.iter().map(|d| format!("{:?}", d.unc)).collect();
        assert_ne!(before, after);
        before.sort();
        after.sort();
        assert_eq!(before, after);
        assert!(shuffled.iter().zip(&dets).all(|(a, b)| a.offsets == b.offsets));

        let single = &dets[..1];
        assert_eq!(corrupt_uncertainties(single, UncertaintyMode::Shuffled, 4), single);
    }

    #[test]
    fn camera_subset_takes_every_kth() {
        let sc = scene(7);
        let ids: Vec<CameraId> = sc.every_kth_camera(2).keys().copied().collect();
        assert_eq!(ids, vec![0, 2, 4, 6]);
        assert_eq!(sc.every_kth_camera(4).len(), 2);
    }
}
