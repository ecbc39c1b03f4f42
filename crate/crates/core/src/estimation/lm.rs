//! Dense Levenberg–Marquardt for small parameter vectors with forward-difference
//! Jacobians.

use nalgebra::{Const, DVector, Dyn, OMatrix, SMatrix, SVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iters: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub rel_cost_tol: f64,
    /// Stop when the ∞-norm of the cost gradient `2 Jᵀ r` falls below this.
    pub grad_tol: f64,
    /// Stop when a step is shorter than this relative to the parameter norm.
    pub step_tol: f64,
    /// Initial damping relative to the largest diagonal entry of `JᵀJ`.
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iters: 100, rel_cost_tol: 1e-10, grad_tol: 1e-8, step_tol: 1e-12, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome<const N: usize> {
    pub x: SVector<f64, N>,
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_DAMPING: f64 = 1e32;

fn jacobian_step(x: f64) -> f64 {
    1e-7 * x.abs().max(1.0)
}

/// Minimizes `‖r(x)‖²`.
///
/// `residuals` returns `None` at infeasible points; such trial steps are
/// rejected like cost increases. Returns `None` if the starting point itself
/// is infeasible.
pub fn levenberg_marquardt<const N: usize, F>(residuals: F, x0: SVector<f64, N>, opts: &LmOptions) -> Option<LmOutcome<N>>
where
    F: Fn(&SVector<f64, N>) -> Option<DVector<f64>>,
{
    let mut x = x0;
    let mut r = residuals(&x)?;
    let mut cost = r.norm_squared();
    let initial_cost = cost;
    let mut damping: Option<f64> = None;
    let mut iterations = 0;
    let mut converged = false;

    'outer: while iterations < opts.max_iters {
        if cost == 0.0 || !cost.is_finite() {
            converged = cost == 0.0;
            break;
        }
        let jac = jacobian(&residuals, &x, &r);
        let g: SVector<f64, N> = jac.tr_mul(&r);
        if 2.0 * g.amax() < opts.grad_tol {
            converged = true;
            break;
        }
        let jtj: SMatrix<f64, N, N> = jac.tr_mul(&jac);
        let mu = damping.get_or_insert_with(|| opts.initial_damping * jtj.diagonal().max().max(f64::MIN_POSITIVE));

        loop {
            let mut a = jtj;
            for i in 0..N {
                a[(i, i)] += *mu;
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-g))) else {
                *mu *= 10.0;
                if *mu > MAX_DAMPING {
                    break 'outer;
                }
                continue;
            };
            let tiny = step.norm() < opts.step_tol * (x.norm() + opts.step_tol);
            let candidate = x + step;
            let trial = residuals(&candidate).map(|rn| {
                let c = rn.norm_squared();
                (rn, c)
            });
            match trial {
                Some((rn, c)) if c < cost => {
                    let rel = (cost - c) / cost;
                    x = candidate;
                    r = rn;
                    cost = c;
                    *mu = (*mu * 0.1).max(f64::MIN_POSITIVE);
                    iterations += 1;
                    if rel < opts.rel_cost_tol || tiny {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    if tiny {
                        converged = true;
                        break 'outer;
                    }
                    *mu *= 10.0;
                    if *mu > MAX_DAMPING {
                        break 'outer;
                    }
                }
            }
        }
    }

    Some(LmOutcome { x, initial_cost, cost, iterations, converged })
}

fn jacobian<const N: usize, F>(residuals: &F, x: &SVector<f64, N>, r: &DVector<f64>) -> OMatrix<f64, Dyn, Const<N>>
where
    F: Fn(&SVector<f64, N>) -> Option<DVector<f64>>,
{
    let mut jac = OMatrix::<f64, Dyn, Const<N>>::zeros(r.len());
    for j in 0..N {
        let h = jacobian_step(x[j]);
        let mut probe = *x;
        probe[j] += h;
        let column = match residuals(&probe) {
            Some(rp) if rp.len() == r.len() => (rp - r) / h,
            _ => {
                probe[j] = x[j] - h;
                match residuals(&probe) {
                    Some(rm) if rm.len() == r.len() => (r - rm) / h,
                    _ => continue,
                }
            }
        };
        jac.set_column(j, &column);
    }
    jac
}
