//! Finite-difference checks of the analytic loss gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::encoding::NormalizedEllipse;
use crate::uncertainty::{finite_difference_check, observation_loss, offset_loss, LogVariance};

pub const FD_STEP: f64 = 1e-6;
/// Samples closer than this to the smooth-L1 kink are redrawn.
const KINK_MARGIN: f64 = 1e-3;

/// A loss kernel under test: value and analytic gradient at a point.
pub type KernelFn = fn(&[f64], &[f64]) -> (f64, Vec<f64>);
/// Draws `(fixed inputs, point)` for one configuration, or `None` to redraw.
pub type SamplerFn = fn(&mut ChaCha8Rng) -> Option<(Vec<f64>, Vec<f64>)>;

#[derive(Clone, Copy)]
pub struct GradKernel {
    pub name: &'static str,
    pub tolerance: f64,
    pub eval: KernelFn,
    pub sample: SamplerFn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub kernel: String,
    pub checked: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn offset_eval(fixed: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let alpha = LogVariance::new(x[1]).expect("finite sample");
    let l = offset_loss(fixed[0], x[0], alpha, false);
    (l.value, vec![l.d_pred, l.d_alpha])
}

fn offset_sample(rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, Vec<f64>)> {
    let (zg, zp): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let alpha = rng.random_range(-3.0..3.0);
    (((zg - zp).abs() - 1.0).abs() > KINK_MARGIN).then(|| (vec![zg], vec![zp, alpha]))
}

fn ellipse(v: &[f64]) -> NormalizedEllipse {
    NormalizedEllipse { ex: v[0], ey: v[1], ea: v[2], eb: v[3], etheta: v[4] }
}

fn observation_eval(fixed: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let alpha = LogVariance::new(x[5]).expect("finite sample");
    match observation_loss(&ellipse(fixed), &ellipse(x), alpha) {
        Ok(l) => {
            let mut g = l.d_pred.to_vec();
            g.push(l.d_alpha);
            (l.value, g)
        }
        Err(_) => (f64::NAN, vec![f64::NAN; 6]),
    }
}

fn random_ellipse(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(0.2..1.0),
        rng.random_range(0.2..1.0),
        rng.random_range(-1.5..1.5),
    ]
}

fn observation_sample(rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, Vec<f64>)> {
    let g = random_ellipse(rng);
    let mut p = random_ellipse(rng);
    p.push(rng.random_range(-2.0..2.0));
    let d = observation_loss(&ellipse(&g), &ellipse(&p), LogVariance::new(0.0).ok()?).ok()?.divergence;
    ((d - 1.0).abs() > KINK_MARGIN).then_some((g, p))
}

/// The offset KL loss and the observation loss.
pub fn default_kernels() -> Vec<GradKernel> {
    vec![
        GradKernel { name: "offset_loss", tolerance: 1e-5, eval: offset_eval, sample: offset_sample },
        GradKernel { name: "observation_loss", tolerance: 1e-4, eval: observation_eval, sample: observation_sample },
    ]
}

/// Checks each kernel at `count` random configurations.
pub fn run_gradcheck(kernels: &[GradKernel], seed: u64, count: usize) -> Vec<KernelReport> {
    kernels
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut max_error: f64 = 0.0;
            let mut checked = 0;
            while checked < count {
                let Some((fixed, x)) = (k.sample)(&mut rng) else { continue };
                let err = finite_difference_check(|p| (k.eval)(&fixed, p), &x, FD_STEP);
                max_error = max_error.max(if err.is_nan() { f64::INFINITY } else { err });
                checked += 1;
            }
            KernelReport {
                kernel: k.name.to_owned(),
                checked,
                max_error,
                tolerance: k.tolerance,
                passed: max_error < k.tolerance,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buggy_offset_eval(fixed: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let (v, mut g) = offset_eval(fixed, x);
        g[1] *= 1.01;
        (v, g)
    }

    #[test]
    fn default_kernels_pass() {
        let reports = run_gradcheck(&default_kernels(), 0, 100);
        assert!(reports.iter().all(|r| r.passed && r.checked == 100), "{reports:?}");
    }

    #[test]
    fn injected_bug_is_named() {
        let mut kernels = default_kernels();
        kernels[0].eval = buggy_offset_eval;
        let reports = run_gradcheck(&kernels, 0, 20);
        assert!(!reports[0].passed);
        assert_eq!(reports[0].kernel, "offset_loss");
        assert!(reports[1].passed);
    }

    #[test]
    fn zero_count_is_vacuous() {
        let reports = run_gradcheck(&default_kernels(), 0, 0);
        assert!(reports.iter().all(|r| r.passed && r.checked == 0));
    }
}
