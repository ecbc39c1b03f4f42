//! Six-offset ellipse parameterization relative to the extended square of a
//! visible-region proposal.
//!
//! An ellipse `E` is described against a reference square `Q` by
//!
//! ```text
//! dx = s (Ex - Qx) / Ql        dy = s (Ey - Qy) / Ql
//! da = ln(2 s Ea / Ql)         db = ln(2 s Eb / Ql)
//! dtheta = Etheta / π          ds = ln((s + 1) / 2)
//! ```
//!
//! where `s = Ql / El` is the visibility ratio and `El = 2 sqrt(Ea² + Eb²)` the
//! side of the square enclosing the full ellipse.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_half_pi, Ellipse, GeometryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodingError {
    #[error("visibility ratio {0} outside (0, 1]: reference square exceeds the full-object square")]
    VisibilityOutOfRange(f64),
    #[error("offsets imply a non-positive visibility ratio ({0})")]
    InvalidVisibility(f64),
    #[error("invalid reference geometry: {0}")]
    InvalidReference(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Axis-aligned proposal box of the visible region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxProposal {
    pub px: f64,
    pub py: f64,
    pub pw: f64,
    pub ph: f64,
}

/// Square sharing the proposal's center, side `ql`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefSquare {
    pub qx: f64,
    pub qy: f64,
    pub ql: f64,
}

impl RefSquare {
    pub fn new(qx: f64, qy: f64, ql: f64) -> Result<Self, EncodingError> {
        let sq = Self { qx, qy, ql };
        sq.validate()?;
        Ok(sq)
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        if !(self.ql > 0.0 && self.ql.is_finite() && self.qx.is_finite() && self.qy.is_finite()) {
            return Err(EncodingError::InvalidReference(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Regression offsets of one ellipse. Ground-truth targets satisfy `ds <= 0`
/// and `dtheta` in `(-1/2, 1/2]`; predictions and optimizer iterates may leave
/// that box, so only `2·exp(ds) - 1 > 0` is required for decoding.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EllipseOffsets {
    pub dx: f64,
    pub dy: f64,
    pub da: f64,
    pub db: f64,
    pub dtheta: f64,
    pub ds: f64,
}

impl EllipseOffsets {
    pub fn to_array(&self) -> [f64; 6] {
        [self.dx, self.dy, self.da, self.db, self.dtheta, self.ds]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self { dx: v[0], dy: v[1], da: v[2], db: v[3], dtheta: v[4], ds: v[5] }
    }

    /// Implied visibility ratio `s' = 2·exp(ds) - 1`.
    pub fn visibility(&self) -> f64 {
        2.0 * self.ds.exp() - 1.0
    }

    fn checked_visibility(&self) -> Result<f64, EncodingError> {
        let s = self.visibility();
        if !(s > 0.0) || !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(EncodingError::InvalidVisibility(s));
        }
        Ok(s)
    }
}

/// Ellipse expressed in the frame of its reference square, with unit side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedEllipse {
    pub ex: f64,
    pub ey: f64,
    pub ea: f64,
    pub eb: f64,
    pub etheta: f64,
}

pub fn extend_square(p: &BoxProposal) -> Result<RefSquare, EncodingError> {
    if !(p.pw > 0.0 && p.ph > 0.0) {
        return Err(EncodingError::InvalidReference(format!("proposal must have positive size: {p:?}")));
    }
    RefSquare::new(p.px, p.py, p.pw.hypot(p.ph))
}

/// Ground-truth offsets of `e` against `q`. Fails when `q` is larger than the
/// square enclosing the whole ellipse.
pub fn encode_offsets(e: &Ellipse, q: &RefSquare) -> Result<EllipseOffsets, EncodingError> {
    q.validate()?;
    let s = q.ql / e.enclosing_square_side();
    if !(s > 0.0 && s <= 1.0) {
        return Err(EncodingError::VisibilityOutOfRange(s));
    }
    Ok(offsets_at_visibility(e, q, s))
}

/// Offsets of an ellipse that is not a ground-truth target, such as the
/// projection of an ellipsoid estimate. The implied visibility may exceed one.
pub fn encode_offsets_unchecked(e: &Ellipse, q: &RefSquare) -> Result<EllipseOffsets, EncodingError> {
    q.validate()?;
    Ok(offsets_at_visibility(e, q, q.ql / e.enclosing_square_side()))
}

fn offsets_at_visibility(e: &Ellipse, q: &RefSquare, s: f64) -> EllipseOffsets {
    EllipseOffsets {
        dx: s * (e.x() - q.qx) / q.ql,
        dy: s * (e.y() - q.qy) / q.ql,
        da: (2.0 * s * e.a() / q.ql).ln(),
        db: (2.0 * s * e.b() / q.ql).ln(),
        dtheta: e.theta() / PI,
        ds: ((s + 1.0) / 2.0).ln(),
    }
}

/// Inverse of [`encode_offsets`]: the full-object square has side `ql / s'`.
pub fn decode_offsets(o: &EllipseOffsets, q: &RefSquare) -> Result<Ellipse, EncodingError> {
    q.validate()?;
    let s = o.checked_visibility()?;
    let full = q.ql / s;
    Ok(Ellipse::new(
        q.qx + o.dx * full,
        q.qy + o.dy * full,
        o.da.exp() * full / 2.0,
        o.db.exp() * full / 2.0,
        PI * o.dtheta,
    )?)
}

/// Angle residual in offset units. The implied angle difference
/// `φ = π (gt - pred)` is folded into `(-π/2, π/2]`, so ellipses whose
/// orientations differ by a half turn have zero residual.
///
/// Equivalent to `atan2(sin φ, cos φ)` when `cos φ >= 0` and
/// `atan2(-sin φ, -cos φ)` otherwise, evaluated with exact modular arithmetic.
pub fn rectify_angle(dtheta_gt: f64, dtheta_pred: f64) -> f64 {
    let d = dtheta_gt - dtheta_pred;
    let r = d - d.round();
    if r <= -0.5 {
        r + 1.0
    } else {
        r
    }
}

pub fn offsets_to_normalized_ellipse(o: &EllipseOffsets) -> Result<NormalizedEllipse, EncodingError> {
    let s = o.checked_visibility()?;
    Ok(NormalizedEllipse {
        ex: o.dx / s,
        ey: o.dy / s,
        ea: 0.5 * o.da.exp() / s,
        eb: 0.5 * o.db.exp() / s,
        etheta: wrap_half_pi(PI * o.dtheta),
    })
}
