//! Reconstructs one ellipsoid from noisy multi-view detections.

use occlusion3d::estimation::{fit_scene, SolverOptions};
use occlusion3d::metrics::{axis_angle_error, o3d, position_error};
use occlusion3d::simulation::{generate_scene, render_detections, NoiseModel, SceneConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = generate_scene(&SceneConfig { n_cameras: 12, seed: 3, ..SceneConfig::default() })?;
    let detections = render_detections(&scene, &NoiseModel::default(), 11)?;
    println!("{} detections over {} cameras", detections.len(), scene.cameras.len());

    let fit = fit_scene(&detections, &scene.cameras, &SolverOptions::default());
    for (id, report) in &fit.reports {
        let gt = &scene.objects[id];
        println!("object {id}: init {:?}, {} iterations, converged {}", report.init, report.iterations, report.converged);
        println!("  cost {:.4} -> {:.4}", report.initial_cost, report.final_cost);
        println!("  truth     t {:.3?} s {:.3?}", gt.t(), gt.s());
        println!("  estimate  t {:.3?} s {:.3?}", report.q_hat.t(), report.q_hat.s());
        println!(
            "  O3D {:.3}, position error {:.4}, axis error {:.2} deg",
            o3d(gt, &report.q_hat, 100_000, 0).iou,
            position_error(gt, &report.q_hat),
            axis_angle_error(gt, &report.q_hat).degrees
        );
    }
    for (id, err) in &fit.failures {
        println!("object {id} failed: {err}");
    }
    Ok(())
}
