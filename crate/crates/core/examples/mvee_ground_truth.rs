//! Builds a ground-truth ellipsoid from a point cloud with the minimum-volume
//! enclosing ellipsoid.

use nalgebra::Vector3;
use occlusion3d::geometry::{min_volume_enclosing_ellipsoid, EllipsoidParams, MVEE_DEFAULT_TOL};
use occlusion3d::metrics::o3d;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Corners of a box: the minimal enclosing ellipsoid has semi-axes sqrt(3)·half-extent.
    let half = [0.4, 0.25, 0.1];
    let corners: Vec<Vector3<f64>> = (0..8)
        .map(|i| {
            let sign = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
            Vector3::new(sign(0) * half[0], sign(1) * half[1], sign(2) * half[2])
        })
        .collect();
    let e = min_volume_enclosing_ellipsoid(&corners, MVEE_DEFAULT_TOL)?;
    println!("box corners: s = {:.4?} (expected {:.4?})", e.s(), half.map(|h: f64| h * 3f64.sqrt()));

    // Points scattered over the surface of a known ellipsoid.
    let truth = EllipsoidParams::new([0.3, 0.2, -0.5], [1.0, -0.5, 0.2], [0.6, 0.35, 0.2])?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (rot, c, s) = (truth.rotation(), truth.center(), truth.s());
    let cloud: Vec<Vector3<f64>> = (0..400)
        .map(|_| {
            let d = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize();
            c + rot * Vector3::new(s[0] * d.x, s[1] * d.y, s[2] * d.z)
        })
        .collect();
    let fitted = min_volume_enclosing_ellipsoid(&cloud, MVEE_DEFAULT_TOL)?;
    println!("surface cloud: t = {:.4?}, s = {:.4?}", fitted.t(), fitted.s());
    println!("O3D vs truth = {:.4}", o3d(&truth, &fitted, 100_000, 2).iou);
    Ok(())
}
