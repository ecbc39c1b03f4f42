//! Evaluation metrics: Monte Carlo 3D IoU, 2D ellipse IoU, axis angle and
//! position error.

use std::collections::BTreeMap;

use occlusion3d::geometry::{Ellipse, EllipsoidParams};
use occlusion3d::metrics::{axis_angle_error, ellipse_iou_2d, evaluate, o3d, position_error};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Concentric spheres of radius 1 and 2: IoU is 1/8.
    let inner = EllipsoidParams::axis_aligned([0.0; 3], [1.0; 3])?;
    let outer = EllipsoidParams::axis_aligned([0.0; 3], [2.0; 3])?;
    let est = o3d(&inner, &outer, 200_000, 0);
    println!("spheres r=1, r=2: IoU {:.4} +/- {:.4} (exact 0.125)", est.iou, est.stderr);

    let a = EllipsoidParams::new([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.5, 0.3, 0.2])?;
    let b = EllipsoidParams::new([0.2, 0.0, 0.0], [0.05, 0.02, 0.0], [0.45, 0.3, 0.2])?;
    let axis = axis_angle_error(&a, &b);
    println!(
        "rotated pair: O3D {:.3}, axis error {:.2} deg (ambiguous {}), position error {:.4}",
        o3d(&a, &b, 100_000, 1).iou,
        axis.degrees,
        axis.ambiguous,
        position_error(&a, &b)
    );

    let e1 = Ellipse::new(0.0, 0.0, 2.0, 1.0, 0.0)?;
    let e2 = Ellipse::new(0.0, 0.0, 2.0, 1.0, std::f64::consts::FRAC_PI_2)?;
    println!("crossed ellipses: 2D IoU {:.4}", ellipse_iou_2d(&e1, &e2, 100_000, 3).iou);

    let gt = BTreeMap::from([(0, a), (1, inner)]);
    let fitted = BTreeMap::from([(0, b)]);
    let r = evaluate(&gt, &fitted, 50_000, 4);
    println!("evaluate: mean O3D {:.3}, missing {:?}", r.o3d, r.missing);
    Ok(())
}
