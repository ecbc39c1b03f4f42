//! KL-divergence regression losses over ellipse offsets and normalized
//! ellipses, with analytic gradients.
//!
//! Uncertainties are carried as log-variances `α = ln σ²`. Constant terms of
//! the divergence (`½ ln 2π` and the entropy of the Dirac target) are dropped.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{offsets_to_normalized_ellipse, rectify_angle, EllipseOffsets, EncodingError, NormalizedEllipse};

/// Largest accepted condition number of a predicted covariance.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UncertaintyError {
    #[error("covariance is singular or ill-conditioned (condition number {0:e})")]
    SingularCovariance(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite log-variance {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

/// `α = ln σ²`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogVariance(f64);

impl LogVariance {
    pub fn new(alpha: f64) -> Result<Self, UncertaintyError> {
        if alpha.is_finite() {
            Ok(Self(alpha))
        } else {
            Err(UncertaintyError::NonFinite(alpha))
        }
    }

    pub fn from_sigma(sigma: f64) -> Result<Self, UncertaintyError> {
        Self::new((sigma * sigma).ln())
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    pub fn variance(self) -> f64 {
        self.0.exp()
    }

    pub fn sigma(self) -> f64 {
        (0.5 * self.0).exp()
    }
}

/// Log-variances of the six offsets plus the observation (divergence) term.
/// Field names follow the detection file schema.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionUncertainty {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub s: f64,
    pub d: f64,
}

impl DetectionUncertainty {
    /// Same log-variance everywhere.
    pub fn uniform(alpha: f64) -> Self {
        Self { x: alpha, y: alpha, a: alpha, b: alpha, theta: alpha, s: alpha, d: alpha }
    }

    pub fn offset_alphas(&self) -> [f64; 6] {
        [self.x, self.y, self.a, self.b, self.theta, self.s]
    }

    pub fn offset_variances(&self) -> [f64; 6] {
        self.offset_alphas().map(f64::exp)
    }

    pub fn observation_variance(&self) -> f64 {
        self.d.exp()
    }

    pub fn is_finite(&self) -> bool {
        self.offset_alphas().iter().all(|v| v.is_finite()) && self.d.is_finite()
    }
}

/// An ellipse viewed as the bivariate Gaussian `N(μ, T diag(a², b²) Tᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEllipse {
    pub mu: Vector2<f64>,
    pub sigma: Matrix2<f64>,
}

pub fn ellipse_to_gaussian(e: &NormalizedEllipse) -> GaussianEllipse {
    let (s, c) = e.etheta.sin_cos();
    let (a2, b2) = (e.ea * e.ea, e.eb * e.eb);
    let sxy = (a2 - b2) * c * s;
    GaussianEllipse {
        mu: Vector2::new(e.ex, e.ey),
        sigma: Matrix2::new(a2 * c * c + b2 * s * s, sxy, sxy, a2 * s * s + b2 * c * c),
    }
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
fn sym2_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let rad = (0.5 * (m[(0, 0)] - m[(1, 1)])).hypot(0.5 * (m[(0, 1)] + m[(1, 0)]));
    (mean - rad, mean + rad)
}

fn checked_inverse(m: &Matrix2<f64>) -> Result<Matrix2<f64>, UncertaintyError> {
    let (lo, hi) = sym2_eigenvalues(m);
    let cond = hi / lo;
    if !(lo > 0.0) || !(cond <= MAX_CONDITION) {
        return Err(UncertaintyError::SingularCovariance(if lo > 0.0 { cond } else { f64::INFINITY }));
    }
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Ok(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

fn det2(m: &Matrix2<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Closed-form `KL(N_g ‖ N_p)`.
pub fn gaussian_kl(g: &GaussianEllipse, p: &GaussianEllipse) -> Result<f64, UncertaintyError> {
    kl_parts(g, p).map(|parts| parts.value)
}

struct KlParts {
    value: f64,
    p_inv: Matrix2<f64>,
    delta: Vector2<f64>,
}

fn kl_parts(g: &GaussianEllipse, p: &GaussianEllipse) -> Result<KlParts, UncertaintyError> {
    let p_inv = checked_inverse(&p.sigma)?;
    let det_g = det2(&g.sigma);
    if !(det_g > 0.0) {
        return Err(UncertaintyError::SingularCovariance(f64::INFINITY));
    }
    let delta = p.mu - g.mu;
    let trace = (p_inv * g.sigma).trace();
    let maha = (delta.transpose() * p_inv * delta)[0];
    let value = 0.5 * trace + 0.5 * maha - 1.0 + 0.5 * (det2(&p.sigma) / det_g).ln();
    // Round-off can push an exact match a hair below zero.
    Ok(KlParts { value: value.max(0.0), p_inv, delta })
}

/// Gradient of `KL(N_g ‖ N_p)` with respect to the predicted ellipse
/// parameters `(ex, ey, ea, eb, etheta)`.
fn kl_with_gradient(g: &GaussianEllipse, pred: &NormalizedEllipse) -> Result<(f64, [f64; 5]), UncertaintyError> {
    let p = ellipse_to_gaussian(pred);
    let KlParts { value, p_inv, delta } = kl_parts(g, &p)?;

    // ∂KL/∂μ_p = Σp⁻¹ δ;  ∂KL/∂Σ_p = ½ (Σp⁻¹ − Σp⁻¹ Σg Σp⁻¹ − Σp⁻¹ δ δᵀ Σp⁻¹).
    let grad_mu = p_inv * delta;
    let grad_sigma = 0.5 * (p_inv - p_inv * g.sigma * p_inv - grad_mu * grad_mu.transpose());

    let (s, c) = pred.etheta.sin_cos();
    let u = Vector2::new(c, s);
    let v = Vector2::new(-s, c);
    let d_sigma_da = 2.0 * pred.ea * u * u.transpose();
    let d_sigma_db = 2.0 * pred.eb * v * v.transpose();
    let d_sigma_dtheta = (pred.ea * pred.ea - pred.eb * pred.eb) * (u * v.transpose() + v * u.transpose());
    let contract = |m: Matrix2<f64>| grad_sigma.component_mul(&m).sum();

    Ok((
        value,
        [grad_mu.x, grad_mu.y, contract(d_sigma_da), contract(d_sigma_db), contract(d_sigma_dtheta)],
    ))
}

/// Smooth-L1 value and derivative.
fn smooth_l1(r: f64) -> (f64, f64) {
    if r.abs() <= 1.0 {
        (0.5 * r * r, r)
    } else {
        (r.abs() - 0.5, r.signum())
    }
}

/// Loss value with gradients with respect to the prediction and its log-variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetLoss {
    pub value: f64,
    pub d_pred: f64,
    pub d_alpha: f64,
}

/// `exp(-α)·smoothL1(z_g - z_p) + α/2`, with the residual folded through
/// [`rectify_angle`] for the orientation offset.
pub fn offset_loss(z_g: f64, z_p: f64, alpha: LogVariance, is_angle: bool) -> OffsetLoss {
    let r = if is_angle { rectify_angle(z_g, z_p) } else { z_g - z_p };
    let (h, dh) = smooth_l1(r);
    let w = (-alpha.0).exp();
    OffsetLoss { value: w * h + 0.5 * alpha.0, d_pred: -w * dh, d_alpha: -w * h + 0.5 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationLoss {
    pub value: f64,
    /// The divergence `KL(e_g ‖ e_p)` that was penalized.
    pub divergence: f64,
    /// Gradient with respect to `(ex, ey, ea, eb, etheta)` of the prediction.
    pub d_pred: [f64; 5],
    pub d_alpha: f64,
}

/// `exp(-α_d)·smoothL1(KL(e_g ‖ e_p)) + α_d/2`.
pub fn observation_loss(
    e_g: &NormalizedEllipse,
    e_p: &NormalizedEllipse,
    alpha_d: LogVariance,
) -> Result<ObservationLoss, UncertaintyError> {
    let (d, grad_d) = kl_with_gradient(&ellipse_to_gaussian(e_g), e_p)?;
    let (h, dh) = smooth_l1(d);
    let w = (-alpha_d.0).exp();
    Ok(ObservationLoss {
        value: w * h + 0.5 * alpha_d.0,
        divergence: d,
        d_pred: grad_d.map(|g| w * dh * g),
        d_alpha: -w * h + 0.5,
    })
}

/// One training sample: target offsets, predicted offsets and predicted uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionSample {
    pub gt: EllipseOffsets,
    pub pred: EllipseOffsets,
    pub unc: DetectionUncertainty,
}

/// Index of the orientation offset in [`EllipseOffsets::to_array`].
pub const THETA_INDEX: usize = 4;

/// Per-sample loss: six offset terms plus the observation term.
pub fn sample_loss(sample: &RegressionSample) -> Result<f64, UncertaintyError> {
    let gt = sample.gt.to_array();
    let pred = sample.pred.to_array();
    let alphas = sample.unc.offset_alphas();
    let mut total = 0.0;
    for k in 0..6 {
        total += offset_loss(gt[k], pred[k], LogVariance::new(alphas[k])?, k == THETA_INDEX).value;
    }
    let e_g = offsets_to_normalized_ellipse(&sample.gt)?;
    let e_p = offsets_to_normalized_ellipse(&sample.pred)?;
    total += observation_loss(&e_g, &e_p, LogVariance::new(sample.unc.d)?)?.value;
    Ok(total)
}

/// Mean of [`sample_loss`] over the batch.
pub fn total_regression_loss(batch: &[RegressionSample]) -> Result<f64, UncertaintyError> {
    if batch.is_empty() {
        return Err(UncertaintyError::EmptyBatch);
    }
    let losses = batch.iter().map(sample_loss).collect::<Result<Vec<_>, _>>()?;
    Ok(pairwise_sum(&losses) / batch.len() as f64)
}

/// Fixed-order pairwise summation.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Compares an analytic gradient against central differences.
///
/// `f` returns the value and analytic gradient at a point. The result is
/// `max_i |g_i - n_i| / max(1, |g_i|)` where `n_i` is the central difference
/// along coordinate `i`.
pub fn finite_difference_check<F>(f: F, x: &[f64], step: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(x);
    let mut worst: f64 = 0.0;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let (fp, _) = f(&probe);
        probe[i] = x[i] - step;
        let (fm, _) = f(&probe);
        probe[i] = x[i];
        let numeric = (fp - fm) / (2.0 * step);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    fn lv(a: f64) -> LogVariance {
        LogVariance::new(a).unwrap()
    }

    fn ne(ex: f64, ey: f64, ea: f64, eb: f64, etheta: f64) -> NormalizedEllipse {
        NormalizedEllipse { ex, ey, ea, eb, etheta }
    }

    fn random_ellipse(rng: &mut ChaCha8Rng) -> NormalizedEllipse {
        ne(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.2..1.0),
            rng.random_range(0.2..1.0),
            rng.random_range(-1.5..1.5),
        )
    }

    #[test]
    fn gaussian_examples() {
        let g = ellipse_to_gaussian(&ne(0.0, 0.0, 1.0, 1.0, 0.0));
        assert_eq!(g.mu, Vector2::zeros());
        assert!((g.sigma - Matrix2::identity()).amax() < 1e-15);
        let g = ellipse_to_gaussian(&ne(0.0, 0.0, 2.0, 1.0, 0.0));
        assert!((g.sigma - Matrix2::new(4.0, 0.0, 0.0, 1.0)).amax() < 1e-15);
        let g = ellipse_to_gaussian(&ne(0.0, 0.0, 2.0, 1.0, FRAC_PI_2));
        assert!((g.sigma - Matrix2::new(1.0, 0.0, 0.0, 4.0)).amax() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let unit = ellipse_to_gaussian(&ne(0.0, 0.0, 1.0, 1.0, 0.0));
        assert_eq!(gaussian_kl(&unit, &unit).unwrap(), 0.0);
        let shifted = ellipse_to_gaussian(&ne(1.0, 0.0, 1.0, 1.0, 0.0));
        assert!((gaussian_kl(&unit, &shifted).unwrap() - 0.5).abs() < 1e-15);
        let wide = ellipse_to_gaussian(&ne(0.0, 0.0, 2.0, 1.0, 0.0));
        assert!((gaussian_kl(&wide, &unit).unwrap() - (1.5 - LN_2)).abs() < 1e-15);
    }

    #[test]
    fn kl_rejects_singular() {
        let unit = ellipse_to_gaussian(&ne(0.0, 0.0, 1.0, 1.0, 0.0));
        let thin = ellipse_to_gaussian(&ne(0.0, 0.0, 1.0, 1e-7, 0.0));
        assert!(matches!(gaussian_kl(&unit, &thin), Err(UncertaintyError::SingularCovariance(_))));
    }

    #[test]
    fn kl_nonnegative_and_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let (e1, e2) = (random_ellipse(&mut rng), random_ellipse(&mut rng));
            let d = gaussian_kl(&ellipse_to_gaussian(&e1), &ellipse_to_gaussian(&e2)).unwrap();
            assert!(d >= 0.0);
            let phi: f64 = rng.random_range(-3.0..3.0);
            let (s, c) = phi.sin_cos();
            let rot = |e: &NormalizedEllipse| {
                ne(c * e.ex - s * e.ey, s * e.ex + c * e.ey, e.ea, e.eb, e.etheta + phi)
            };
            let d_rot = gaussian_kl(&ellipse_to_gaussian(&rot(&e1)), &ellipse_to_gaussian(&rot(&e2))).unwrap();
            assert!((d - d_rot).abs() < 1e-10 * d.max(1.0));
        }
    }

    #[test]
    fn offset_loss_examples() {
        assert_eq!(offset_loss(0.3, 0.3, lv(0.0), false).value, 0.0);
        for r in [-1.0, -0.4, 0.2, 0.9] {
            assert!((offset_loss(r, 0.0, lv(0.0), false).value - 0.5 * r * r).abs() < 1e-15);
        }
        let l = offset_loss(2.0, 0.0, lv(0.0), false);
        assert_eq!(l.value, 1.5);
        // Stationary α for r = 2: exp(-α)(|r| - ½) = ½ → α = ln 3.
        let at_min = offset_loss(2.0, 0.0, lv(3f64.ln()), false);
        assert!(at_min.d_alpha.abs() < 1e-15);
    }

    #[test]
    fn angle_pair_at_half_turn_is_zero_residual() {
        let zero = offset_loss(0.1, 0.1, lv(0.3), true);
        let folded = offset_loss(0.5, -0.5, lv(0.3), true);
        assert_eq!(zero, folded);
    }

    #[test]
    fn smooth_l1_is_c1_at_kink() {
        let alpha = lv(0.7);
        let eps = 1e-9;
        let below = offset_loss(1.0 - eps, 0.0, alpha, false);
        let above = offset_loss(1.0 + eps, 0.0, alpha, false);
        assert!((below.value - above.value).abs() < 1e-8);
        assert!((below.d_pred - above.d_pred).abs() < 1e-8);
    }

    #[test]
    fn minimizing_alpha_grows_with_residual() {
        // For fixed residual the loss is convex in α with minimizer ln(2·h(r)).
        let mut last = f64::NEG_INFINITY;
        for r in [0.05f64, 0.2, 0.8, 1.5, 4.0] {
            let h = if r <= 1.0 { 0.5 * r * r } else { r - 0.5 };
            let alpha_star = (2.0 * h).ln();
            assert!(offset_loss(r, 0.0, lv(alpha_star), false).d_alpha.abs() < 1e-12);
            for da in [-0.5, 0.5] {
                let off = offset_loss(r, 0.0, lv(alpha_star + da), false).value;
                assert!(off > offset_loss(r, 0.0, lv(alpha_star), false).value);
            }
            assert!(alpha_star > last);
            last = alpha_star;
        }
    }

    #[test]
    fn observation_loss_examples() {
        let e = ne(0.1, -0.1, 0.6, 0.4, 0.3);
        let l = observation_loss(&e, &e, lv(0.0)).unwrap();
        assert_eq!(l.value, 0.0);
        // d = 0.5 with unit covariances and unit center offset.
        let g = ne(0.0, 0.0, 1.0, 1.0, 0.0);
        let p = ne(1.0, 0.0, 1.0, 1.0, 0.0);
        let l = observation_loss(&g, &p, lv(0.0)).unwrap();
        assert!((l.divergence - 0.5).abs() < 1e-15);
        assert!((l.value - 0.125).abs() < 1e-15);
        // Stationary α_d makes exp(-α_d)·smoothL1(d) = ½.
        let alpha = (2.0 * 0.125f64).ln();
        let l = observation_loss(&g, &p, lv(alpha)).unwrap();
        assert!(l.d_alpha.abs() < 1e-12);
        assert!(((-alpha).exp() * 0.125 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadratic_gradcheck() {
        let f = |x: &[f64]| (0.5 * x.iter().map(|v| v * v).sum::<f64>(), x.to_vec());
        assert!(finite_difference_check(f, &[0.3, -2.0, 7.5], 1e-6) < 1e-9);
    }

    #[test]
    fn offset_loss_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 100 {
            let (zg, zp, a): (f64, f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-3.0..3.0));
            if ((zg - zp).abs() - 1.0).abs() < 1e-3 {
                continue;
            }
            let f = |x: &[f64]| {
                let l = offset_loss(zg, x[0], lv(x[1]), false);
                (l.value, vec![l.d_pred, l.d_alpha])
            };
            assert!(finite_difference_check(f, &[zp, a], 1e-6) < 1e-5);
            checked += 1;
        }
    }

    #[test]
    fn observation_loss_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let g = random_ellipse(&mut rng);
            let p = random_ellipse(&mut rng);
            let a = rng.random_range(-2.0..2.0);
            let f = |x: &[f64]| {
                let l = observation_loss(&g, &ne(x[0], x[1], x[2], x[3], x[4]), lv(x[5])).unwrap();
                let mut grad = l.d_pred.to_vec();
                grad.push(l.d_alpha);
                (l.value, grad)
            };
            let err = finite_difference_check(f, &[p.ex, p.ey, p.ea, p.eb, p.etheta, a], 1e-6);
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn broken_gradient_is_detected() {
        let f = |x: &[f64]| (x[0] * x[0], vec![x[0]]);
        assert!(finite_difference_check(f, &[3.0], 1e-6) > 0.1);
    }

    /// Straightforward re-implementation of the batch loss, term by term.
    fn naive_sample_loss(s: &RegressionSample) -> f64 {
        let gt = s.gt.to_array();
        let pr = s.pred.to_array();
        let al = s.unc.offset_alphas();
        let mut total = 0.0;
        for k in 0..6 {
            let mut r = gt[k] - pr[k];
            if k == 4 {
                let phi = std::f64::consts::PI * r;
                r = if phi.cos() >= 0.0 { phi.sin().atan2(phi.cos()) } else { (-phi.sin()).atan2(-phi.cos()) }
                    / std::f64::consts::PI;
            }
            total += if r.abs() <= 1.0 {
                0.5 * (-al[k]).exp() * r * r + 0.5 * al[k]
            } else {
                (-al[k]).exp() * (r.abs() - 0.5) + 0.5 * al[k]
            };
        }
        let norm = |o: &EllipseOffsets| {
            let sp = 2.0 * o.ds.exp() - 1.0;
            (o.dx / sp, o.dy / sp, 0.5 * o.da.exp() / sp, 0.5 * o.db.exp() / sp, std::f64::consts::PI * o.dtheta)
        };
        let cov = |(_, _, a, b, t): (f64, f64, f64, f64, f64)| {
            let (sn, cs) = t.sin_cos();
            let rot = Matrix2::new(cs, -sn, sn, cs);
            rot * Matrix2::new(a * a, 0.0, 0.0, b * b) * rot.transpose()
        };
        let (g, p) = (norm(&s.gt), norm(&s.pred));
        let (sg, sp) = (cov(g), cov(p));
        let sp_inv = sp.try_inverse().unwrap();
        let dmu = Vector2::new(p.0 - g.0, p.1 - g.1);
        let d = 0.5 * (sp_inv * sg).trace() + 0.5 * (dmu.transpose() * sp_inv * dmu)[0] - 1.0
            + 0.5 * (sp.determinant() / sg.determinant()).ln();
        let h = if d <= 1.0 { 0.5 * d * d } else { d - 0.5 };
        total + (-s.unc.d).exp() * h + 0.5 * s.unc.d
    }

    fn random_sample(rng: &mut ChaCha8Rng) -> RegressionSample {
        let gt = EllipseOffsets {
            dx: rng.random_range(-0.3..0.3),
            dy: rng.random_range(-0.3..0.3),
            da: rng.random_range(-1.0..-0.1),
            db: rng.random_range(-1.5..-0.4),
            dtheta: rng.random_range(-0.5..0.5),
            ds: rng.random_range(0.65f64.ln()..0.0),
        };
        let mut pred = gt;
        pred.dx += rng.random_range(-0.2..0.2);
        pred.dy += rng.random_range(-0.2..0.2);
        pred.da += rng.random_range(-0.2..0.2);
        pred.db += rng.random_range(-0.2..0.2);
        pred.dtheta += rng.random_range(-0.3..0.3);
        pred.ds += rng.random_range(-0.1..0.1);
        let mut unc = DetectionUncertainty::default();
        for v in [&mut unc.x, &mut unc.y, &mut unc.a, &mut unc.b, &mut unc.theta, &mut unc.s, &mut unc.d] {
            *v = rng.random_range(-4.0..1.0);
        }
        RegressionSample { gt, pred, unc }
    }

    #[test]
    fn total_loss_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let batch: Vec<_> = (0..64).map(|_| random_sample(&mut rng)).collect();
        let expected = batch.iter().map(naive_sample_loss).sum::<f64>() / batch.len() as f64;
        let got = total_regression_loss(&batch).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected.abs().max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn total_loss_edge_cases() {
        assert_eq!(total_regression_loss(&[]), Err(UncertaintyError::EmptyBatch));
        let gt = EllipseOffsets { da: -0.2, db: -0.6, ds: -0.1, ..Default::default() };
        let sample = RegressionSample { gt, pred: gt, unc: DetectionUncertainty::uniform(0.0) };
        assert_eq!(total_regression_loss(&[sample]).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_sample(&mut rng);
        let one = total_regression_loss(&[s]).unwrap();
        let two = total_regression_loss(&[s, s]).unwrap();
        assert!((one - two).abs() < 1e-15);
    }
}
