//! Uncertainty-aware regression losses and a finite-difference check of
//! their gradients.

use occlusion3d::cli::{default_kernels, run_gradcheck};
use occlusion3d::encoding::{offsets_to_normalized_ellipse, EllipseOffsets};
use occlusion3d::uncertainty::{
    ellipse_to_gaussian, gaussian_kl, offset_loss, total_regression_loss, DetectionUncertainty, LogVariance,
    RegressionSample,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A confident prediction pays more for the same error than an unsure one.
    for alpha in [-4.0, -1.0, 2.0] {
        let l = offset_loss(0.3, 0.1, LogVariance::new(alpha)?, false);
        println!("alpha {alpha:+.1}: loss {:.4}, dL/dpred {:+.4}, dL/dalpha {:+.4}", l.value, l.d_pred, l.d_alpha);
    }

    let gt = EllipseOffsets::from_array([0.05, -0.02, 0.4, 0.2, 0.1, 0.8]);
    let pred = EllipseOffsets::from_array([0.07, 0.01, 0.38, 0.25, 0.13, 0.75]);
    let g = ellipse_to_gaussian(&offsets_to_normalized_ellipse(&gt)?);
    let p = ellipse_to_gaussian(&offsets_to_normalized_ellipse(&pred)?);
    println!("KL(gt || pred) = {:.5}", gaussian_kl(&g, &p)?);

    let batch = [
        RegressionSample { gt, pred, unc: DetectionUncertainty::uniform(-2.0) },
        RegressionSample { gt, pred: gt, unc: DetectionUncertainty::uniform(-2.0) },
    ];
    println!("batch loss = {:.5}", total_regression_loss(&batch)?);

    for r in run_gradcheck(&default_kernels(), 7, 50) {
        println!(
            "{} {}: {} points, max rel err {:.2e} (tol {:.0e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.kernel,
            r.checked,
            r.max_error,
            r.tolerance
        );
    }
    Ok(())
}
