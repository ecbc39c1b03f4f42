//! Projects an ellipsoid into a camera and checks the image ellipse against
//! the silhouette of sampled surface points.

use std::f64::consts::PI;

use nalgebra::Vector3;
use occlusion3d::geometry::{
    compose_dual_quadric, decompose_dual_quadric, dual_conic_to_ellipse, project_dual_quadric, Camera, Ellipse,
    EllipsoidParams, GeometryError, Intrinsics,
};

fn main() -> Result<(), GeometryError> {
    let q = EllipsoidParams::new([0.4, -0.2, 0.1], [0.2, -0.1, 0.3], [0.5, 0.3, 0.2])?;
    let intr = Intrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0 };
    let cam = Camera::look_at(intr, &Vector3::new(3.0, -2.5, 1.5), &Vector3::zeros(), &Vector3::z())?;

    let dual = compose_dual_quadric(&q);
    println!("Q* =\n{:.5}", dual.matrix());
    let back = decompose_dual_quadric(&dual)?;
    println!("recovered t = {:?}, s = {:?}", back.t(), back.s());

    let e = dual_conic_to_ellipse(&project_dual_quadric(&dual, &cam)?)?;
    println!(
        "image ellipse: center ({:.2}, {:.2}), semi-axes {:.2} x {:.2}, angle {:.1} deg",
        e.x(),
        e.y(),
        e.a(),
        e.b(),
        e.theta().to_degrees()
    );

    // Every projected surface point must fall inside (or on) the image ellipse.
    let (rot, c, s) = (q.rotation(), q.center(), q.s());
    let slightly_bigger = Ellipse::new(e.x(), e.y(), e.a() * (1.0 + 1e-9), e.b() * (1.0 + 1e-9), e.theta())?;
    let mut outside = 0;
    for i in 0..60 {
        for j in 1..30 {
            let (u, v) = (2.0 * PI * i as f64 / 60.0, PI * j as f64 / 30.0);
            let local = Vector3::new(s[0] * v.sin() * u.cos(), s[1] * v.sin() * u.sin(), s[2] * v.cos());
            if let Some(px) = cam.project_point(&(c + rot * local)) {
                outside += usize::from(!slightly_bigger.contains(px));
            }
        }
    }
    println!("surface points outside the projected ellipse: {outside}");
    Ok(())
}
