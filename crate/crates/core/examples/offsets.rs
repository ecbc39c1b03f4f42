//! Encodes an ellipse as offsets relative to a reference square and back,
//! including the angle wrap used by the regression loss.

use occlusion3d::encoding::{
    decode_offsets, encode_offsets, extend_square, offsets_to_normalized_ellipse, rectify_angle, BoxProposal,
};
use occlusion3d::geometry::Ellipse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let e = Ellipse::new(210.0, 145.0, 60.0, 25.0, 0.6)?;

    // A proposal box that only covers part of the ellipse, as when occluded.
    let proposal = BoxProposal { px: 200.0, py: 140.0, pw: 80.0, ph: 50.0 };
    let square = extend_square(&proposal)?;
    println!("reference square: center ({}, {}), side {}", square.qx, square.qy, square.ql);

    let o = encode_offsets(&e, &square)?;
    println!("offsets [x, y, a, b, theta, s] = {:.4?}", o.to_array());
    println!("visibility = {:.3}", o.visibility());

    let back = decode_offsets(&o, &square)?;
    println!("decoded: ({:.6}, {:.6}, {:.6}, {:.6}, {:.6})", back.x(), back.y(), back.a(), back.b(), back.theta());

    let n = offsets_to_normalized_ellipse(&o)?;
    println!("normalized ellipse: {n:?}");

    // Angles a half-turn apart describe the same ellipse.
    for (gt, pred) in [(0.45, -0.45), (0.1, 0.2), (-0.49, 0.49)] {
        println!("rectify({gt:+}, {pred:+}) = {:+.3}", rectify_angle(gt, pred));
    }
    Ok(())
}
