//! Self-similar Rankine–Hugoniot jump map, its inverse, and region tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_plane::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionTag {
    SU,
    SL,
    Other,
}

pub fn region(gamma: f64, p: PhasePoint) -> RegionTag {
    let u = 1.0 + p.v;
    if p.c <= 0.0 && u > -p.c {
        RegionTag::SU
    } else if p.c < 0.0 && -((gamma - 1.0) / (2.0 * gamma)).sqrt() * p.c <= u && u < -p.c {
        RegionTag::SL
    } else {
        RegionTag::Other
    }
}

fn on_sonic_lower(p: PhasePoint) -> bool {
    let u = 1.0 + p.v;
    p.c <= 0.0 && u > 0.0 && (u + p.c).abs() <= 1e-14 * u
}

/// Forward map from the state ahead of the shock to the state behind it.
pub fn jump(gamma: f64, pre: PhasePoint) -> Result<PhasePoint> {
    if region(gamma, pre) != RegionTag::SU && !on_sonic_lower(pre) {
        return Err(Error::Region {
            v: pre.v,
            c: pre.c,
            region: "S_U",
        });
    }
    Ok(jump_unchecked(gamma, pre))
}

/// Jump formulas without the region test; callers guarantee `1+V > 0`.
pub fn jump_unchecked(gamma: f64, pre: PhasePoint) -> PhasePoint {
    let u = 1.0 + pre.v;
    let c2 = pre.c * pre.c;
    let up = (gamma - 1.0) / (gamma + 1.0) * u + 2.0 * c2 / ((gamma + 1.0) * u);
    let cp2 = c2 + 0.5 * (gamma - 1.0) * (u * u - up * up);
    PhasePoint::new(up - 1.0, -cp2.max(0.0).sqrt())
}

/// Sonic-line image factor: the line `C = -κ(1+V)` maps to `C = -I(κ)(1+V)`.
pub fn line_image_kappa(gamma: f64, kappa: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::Domain(format!("kappa = {kappa} must lie in [0, 1)")));
    }
    Ok(image_factor(gamma, kappa))
}

// The map κ -> I(κ) is an involution on [0, sqrt(2γ/(γ-1))].
fn image_factor(gamma: f64, kappa: f64) -> f64 {
    let k2 = kappa * kappa;
    ((2.0 * gamma - (gamma - 1.0) * k2) / (gamma - 1.0 + 2.0 * k2)).sqrt()
}

/// Inverse of [`jump`]: recovers the pre-shock state on the κ-line whose image
/// passes through `post`, then applies one Newton correction on the forward map.
pub fn jump_inverse(gamma: f64, post: PhasePoint) -> Result<PhasePoint> {
    let up = 1.0 + post.v;
    if on_sonic_lower(post) {
        return Ok(post);
    }
    let on_image_of_axis = post.c < 0.0
        && up > 0.0
        && (up + ((gamma - 1.0) / (2.0 * gamma)).sqrt() * post.c).abs() <= 1e-14 * up;
    if region(gamma, post) != RegionTag::SL && !on_image_of_axis {
        return Err(Error::Region {
            v: post.v,
            c: post.c,
            region: "S_L",
        });
    }
    let i2 = (post.c / up).powi(2);
    let k2 = ((2.0 * gamma - (gamma - 1.0) * i2) / (gamma - 1.0 + 2.0 * i2)).max(0.0);
    let u = (gamma + 1.0) * up / (gamma - 1.0 + 2.0 * k2);
    let mut pre = PhasePoint::new(u - 1.0, -k2.sqrt() * u);
    // Newton step on the forward map with a finite-difference Jacobian.
    let f0 = jump_unchecked(gamma, pre);
    let (r0, r1) = (f0.v - post.v, f0.c - post.c);
    if r0 != 0.0 || r1 != 0.0 {
        let h = 1e-7 * (1.0 + u);
        let fv = jump_unchecked(gamma, PhasePoint::new(pre.v + h, pre.c));
        let fc = jump_unchecked(gamma, PhasePoint::new(pre.v, pre.c + h));
        let (a, b) = ((fv.v - f0.v) / h, (fc.v - f0.v) / h);
        let (c, d) = ((fv.c - f0.c) / h, (fc.c - f0.c) / h);
        let det = a * d - b * c;
        if det.abs() > 1e-300 {
            let cand = PhasePoint::new(
                pre.v - (d * r0 - b * r1) / det,
                pre.c - (-c * r0 + a * r1) / det,
            );
            let fc2 = jump_unchecked(gamma, cand);
            if (fc2.v - post.v).hypot(fc2.c - post.c) < r0.hypot(r1) {
                pre = cand;
            }
        }
    }
    if pre.c > 0.0 {
        pre.c = 0.0;
    }
    Ok(pre)
}

/// Lax condition on the pre-shock state: `C² < (1+V)²`.
pub fn entropy_check(pre: PhasePoint) -> bool {
    pre.c * pre.c < (1.0 + pre.v) * (1.0 + pre.v)
}
