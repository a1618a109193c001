//! Passage through the origin into x > 0 and the maximal smooth extension
//! down to the lower sonic line.

use serde::{Deserialize, Serialize};

use crate::collapse::{gauss_integrate, lnr_slope, lnx_regular_part, CollapseBranch};
use crate::error::{Error, Result};
use crate::ode_engine::{
    integrate_phase, EventKind, EventSpec, IntegrateOptions, State, Trajectory,
};
use crate::origin_series::{slope_bound_s, OriginSeries};
use crate::phase_plane::{
    critical_points, gamma_g, gamma_u, special_z_with, z_s, Params, PhasePoint, Triple,
};
use crate::roots::brent;

/// The analytic patch `|C| <= delta` around P0, with `ln|x|` and `ln R`
/// written as regular functions of C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginPatch {
    pub params: Params,
    pub series: OriginSeries,
    pub v1: f64,
    pub delta: f64,
    pub h0: f64,
    pub q0: f64,
}

impl OriginPatch {
    pub fn from_branch(cb: &CollapseBranch) -> Self {
        Self {
            params: cb.params,
            series: cb.series.clone(),
            v1: cb.v1,
            delta: cb.delta,
            h0: cb.h0,
            q0: cb.q0,
        }
    }

    pub fn v(&self, c: f64) -> f64 {
        self.series.eval_unchecked(c).0
    }

    /// `ln|x| - ln|C|`.
    pub fn h(&self, c: f64) -> f64 {
        if c == 0.0 {
            return self.h0;
        }
        let p = &self.params;
        self.h0 + gauss_integrate(|s| lnx_regular_part(p, self.v(s), s), 0.0, c, 2)
    }

    pub fn ln_r(&self, c: f64) -> f64 {
        if c == 0.0 {
            return self.q0;
        }
        self.q0 + gauss_integrate(|s| lnr_slope(&self.params, &self.series, s), 0.0, c, 2)
    }

    /// `x = -C e^{H(C)}`, negative for C > 0 and positive for C < 0.
    pub fn x(&self, c: f64) -> f64 {
        -c * self.h(c).exp()
    }

    /// Full state at `c != 0`.
    pub fn state(&self, c: f64) -> State {
        [self.v(c), c, c.abs().ln() + self.h(c), self.ln_r(c)]
    }

    /// Inverts [`OriginPatch::x`] on `[-delta, delta]`.
    pub fn c_at_x(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let (lo, hi) = if x < 0.0 {
            (0.0, self.delta)
        } else {
            (-self.delta, 0.0)
        };
        let f = |c: f64| self.x(c) - x;
        if f(lo).signum() == f(hi).signum() {
            return Err(Error::Domain(format!("x = {x} outside the origin patch")));
        }
        brent(f, lo, hi, 1e-17, 200)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub patch: OriginPatch,
    /// State at `C = -delta` from which numerical integration resumes.
    pub outbound_start: State,
    /// Largest disagreement between series and integrator on the annuli
    /// `delta/2 <= |C| <= delta`.
    pub overlap_error: f64,
    /// `dC/dV` at the origin, `1/v1`.
    pub outbound_slope: f64,
    pub slope_bound: f64,
    /// Spread of `V/x` over the last decade `|x| in [1e-9, 1e-8] x_delta`.
    pub vx_spread: f64,
    /// Largest `|V/x - dV/dx|` over the same decade.
    pub vx_derivative_gap: f64,
}

fn overlap_run(
    p: &Params,
    from: State,
    to_c: f64,
    patch: &OriginPatch,
    opts: &IntegrateOptions,
) -> Result<f64> {
    let t = integrate_phase(
        p,
        from,
        (0.0, to_c - from[1]),
        &[EventSpec::c_level(to_c, true)],
        opts,
    )?;
    match t.last_event().map(|e| e.kind) {
        Some(EventKind::CLevel(_)) => {}
        _ => {
            return Err(Error::Convergence(
                "overlap run did not reach its C level".into(),
            ))
        }
    }
    let mut worst: f64 = 0.0;
    for y in &t.samples {
        let s = patch.state(y[1]);
        worst = worst
            .max((y[0] - s[0]).abs())
            .max((y[2] - s[2]).abs())
            .max((y[3] - s[3]).abs());
    }
    Ok(worst)
}

pub fn continue_through_origin(
    cb: &CollapseBranch,
    opts: &IntegrateOptions,
) -> Result<Continuation> {
    let p = &cb.params;
    let patch = OriginPatch::from_branch(cb);
    let d = patch.delta;
    let mut o = *opts;
    o.annotate = true;

    let inbound = overlap_run(p, cb.traj.last(), 0.5 * d, &patch, &o)?;
    let outbound = overlap_run(p, patch.state(-0.5 * d), -d, &patch, &o)?;

    let s = slope_bound_s(p, cb.triple)?;
    let x_d = patch.x(-d);
    let mut ratios = Vec::new();
    let mut gap: f64 = 0.0;
    for k in 0..=10 {
        let x = x_d * 1e-9 * 10f64.powf(k as f64 / 10.0);
        let c = patch.c_at_x(x)?;
        let (v, dv) = patch.series.eval_unchecked(c);
        let hp = lnx_regular_part(p, v, c);
        let dxdc = -patch.h(c).exp() * (1.0 + c * hp);
        ratios.push(v / x);
        gap = gap.max((v / x - dv / dxdc).abs());
    }
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);

    Ok(Continuation {
        outbound_start: patch.state(-d),
        overlap_error: inbound.max(outbound),
        outbound_slope: 1.0 / patch.v1,
        slope_bound: s,
        vx_spread: hi - lo,
        vx_derivative_gap: gap,
        patch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxExtension {
    /// From `C = -delta` down to the lower sonic line, x attached (x > 0).
    pub traj: Trajectory,
    pub vs: f64,
    pub cs: f64,
    pub xs: f64,
    /// First crossing of G = 0 in the fourth quadrant.
    pub g_crossing: PhasePoint,
}

pub fn maximal_extension(
    p: &Params,
    cont: &Continuation,
    triple: Triple,
    opts: &IntegrateOptions,
) -> Result<MaxExtension> {
    let cp = critical_points(p)?;
    let y0 = cont.outbound_start;
    let (_, dv) = cont.patch.series.eval_unchecked(y0[1]);
    let mut o = *opts;
    o.annotate = true;
    let events = [
        EventSpec::g_zero(false),
        EventSpec::sonic_lower(true),
        EventSpec::exit_box(-1.0, 1e3, -1e3, 0.0),
    ];
    let mut traj = integrate_phase(p, y0, (-dv, -1.0), &events, &o)?;
    let end = traj.last_event().cloned();
    let Some(end) = end.filter(|e| e.kind == EventKind::SonicLower) else {
        let y = traj.last();
        return Err(Error::Convergence(format!(
            "maximal extension left the fourth quadrant at ({}, {}) before the sonic line",
            y[0], y[1]
        )));
    };
    let g_crossing = traj
        .events
        .iter()
        .find(|e| e.kind == EventKind::GZero && e.state[0] > 0.0 && e.state[1] < 0.0)
        .map(|e| PhasePoint::new(e.state[0], e.state[1]))
        .ok_or_else(|| Error::TheoryViolation("maximal extension never crosses G = 0".into()))?;
    traj.events.retain(|e| e.kind != EventKind::Exit);
    let x0 = cont.patch.x(y0[1]);
    traj.attach_x(0, x0)?;
    traj.attach_r(0, y0[3].exp())?;
    let last = traj.last();
    let (vs, cs) = (end.state[0], end.state[1]);
    let sonic_gap = (1.0 + vs + cs).abs();
    if sonic_gap > 1e-10 {
        return Err(Error::Convergence(format!(
            "sonic endpoint off the line by {sonic_gap}"
        )));
    }
    if !(cs < cp.ring_c) {
        return Err(Error::TheoryViolation(format!(
            "C_s = {cs} is not below the ring value {}",
            cp.ring_c
        )));
    }
    if triple == Triple::P8 && !(cs < cp.p9.c) {
        return Err(Error::TheoryViolation(format!(
            "C_s = {cs} is not below C9 = {}",
            cp.p9.c
        )));
    }
    Ok(MaxExtension {
        xs: last[2].exp(),
        vs,
        cs,
        g_crossing,
        traj,
    })
}

/// Outcome of a pointwise barrier or inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub name: String,
    pub applicable: bool,
    pub holds: bool,
    /// Smallest margin found (negative when violated); `None` when the check
    /// does not apply or saw no points.
    pub worst: Option<f64>,
}

impl BarrierCheck {
    fn skipped(name: &str) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            holds: true,
            worst: None,
        }
    }

    fn from_margins(name: &str, margins: impl Iterator<Item = f64>, slack: f64) -> Self {
        let worst = margins.reduce(f64::min);
        Self {
            name: name.into(),
            applicable: true,
            holds: worst.is_none_or(|w| w >= -slack),
            worst,
        }
    }
}

/// Barrier and inequality checks along the collapse branch and the maximal
/// extension, each marked non-applicable outside its parameter regime.
pub fn barrier_checks(
    cb: &CollapseBranch,
    ext: &MaxExtension,
    gamma_star: f64,
) -> Result<Vec<BarrierCheck>> {
    let p = &cb.params;
    let (g, m, z) = (p.gamma, p.m, p.z);
    let cp = critical_points(p)?;
    let sz = special_z_with(g, m, gamma_star)?;
    let slack = 1e-9;
    let mut out = Vec::new();

    // Collapse branch: monotone decrease, then the square-root barriers on (V6, 0).
    let col = &cb.traj.samples;
    let mono = col
        .windows(2)
        .map(|w| -(w[1][1] - w[0][1]) * (w[1][0] - w[0][0]).signum());
    out.push(BarrierCheck::from_margins(
        "collapse_monotone_decreasing",
        mono,
        0.0,
    ));
    let on_v6 = |s: &&State| s[0] > cp.p6.v && s[0] < 0.0;
    let b1 = "collapse_below_sqrt_neg_v";
    out.push(if g <= gamma_star {
        BarrierCheck::from_margins(
            b1,
            col.iter().filter(on_v6).map(|s| (-s[0]).sqrt() - s[1]),
            slack,
        )
    } else {
        BarrierCheck::skipped(b1)
    });
    let b32 = "collapse_below_sqrt_neg_3v_over_2";
    out.push(if (2.0..=3.0).contains(&g) {
        BarrierCheck::from_margins(
            b32,
            col.iter()
                .filter(on_v6)
                .map(|s| (-1.5 * s[0]).sqrt() - s[1]),
            slack,
        )
    } else {
        BarrierCheck::skipped(b32)
    });

    // Maximal extension on C in [C9, 0).
    let ext_s = &ext.traj.samples;
    let above_c9 = |s: &&State| s[1] >= cp.p9.c && s[1] < 0.0;

    let k_name = "extension_above_k_c2";
    let zs = z_s(g, m);
    out.push(
        if cb.triple == Triple::P6 && g > 1.0 && g < 2.0 && z >= zs && z <= sz.z_m {
            let k = cp.p8.v / (cp.p8.c * cp.p8.c);
            BarrierCheck::from_margins(
                k_name,
                ext_s
                    .iter()
                    .filter(above_c9)
                    .map(|s| s[0] - k * s[1] * s[1]),
                slack,
            )
        } else {
            BarrierCheck::skipped(k_name)
        },
    );

    let t_name = "extension_above_minus_two_thirds_c2";
    out.push(match cp.p5 {
        Some(p5) if g >= gamma_g(m) && z >= sz.z_g && z <= sz.z_m => BarrierCheck::from_margins(
            t_name,
            ext_s
                .iter()
                .filter(|s| s[1] >= p5.c && s[1] < 0.0)
                .map(|s| s[0] + 2.0 / 3.0 * s[1] * s[1]),
            slack,
        ),
        _ => BarrierCheck::skipped(t_name),
    });

    let small_z = cb.triple == Triple::P6 && g < gamma_u(m) && z > sz.z_g && z < sz.z_0;
    let q_name = "extension_above_minus_c_one_plus_c";
    out.push(if small_z {
        BarrierCheck::from_margins(
            q_name,
            ext_s
                .iter()
                .filter(above_c9)
                .map(|s| s[0] + s[1] * (1.0 + s[1])),
            slack,
        )
    } else {
        BarrierCheck::skipped(q_name)
    });
    let u_name = "collapse_below_minus_v";
    out.push(if small_z {
        BarrierCheck::from_margins(
            u_name,
            col.iter()
                .filter(|s| s[0] >= cp.p8.v && s[0] < 0.0)
                .map(|s| -s[0] - s[1]),
            slack,
        )
    } else {
        BarrierCheck::skipped(u_name)
    });

    let c5_name = "c5_above_minus_two_thirds";
    out.push(match cp.p5 {
        Some(p5) if g >= gamma_g(m) && z >= sz.z_g && z <= sz.z_m => {
            BarrierCheck::from_margins(c5_name, std::iter::once(p5.c + 2.0 / 3.0), 0.0)
        }
        _ => BarrierCheck::skipped(c5_name),
    });

    // d/dC (C / (1+V)) = (1 + V - C V') / (1+V)^2 with V' = G/F.
    let r_name = "extension_ratio_monotone";
    out.push(if g <= gamma_star {
        BarrierCheck::from_margins(
            r_name,
            ext_s.iter().map(|s| {
                let (v, c) = (s[0], s[1]);
                let vp = p.g(v, c) / p.f(v, c);
                (1.0 + v - c * vp) / ((1.0 + v) * (1.0 + v))
            }),
            0.0,
        )
    } else {
        BarrierCheck::skipped(r_name)
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::{collapse_trajectory, find_lambda_std, ShootOptions};

    fn branch(g: f64, m: u32) -> CollapseBranch {
        let r = find_lambda_std(g, m, &ShootOptions::default()).unwrap();
        collapse_trajectory(&r.params(), r.triple, &IntegrateOptions::default()).unwrap()
    }

    #[test]
    fn patch_x_is_odd_to_leading_order() {
        let cb = branch(1.4, 2);
        let patch = OriginPatch::from_branch(&cb);
        let c = 1e-6;
        let (a, b) = (patch.x(c), patch.x(-c));
        assert!(a < 0.0 && b > 0.0);
        assert!(((a + b) / b).abs() < 1e-4);
        let back = patch.c_at_x(b).unwrap();
        assert!((back + c).abs() < 1e-18);
    }

    #[test]
    fn extension_reaches_lower_sonic_line() {
        let cb = branch(1.5, 1);
        let cont = continue_through_origin(&cb, &IntegrateOptions::default()).unwrap();
        assert!(cont.overlap_error < 1e-8, "{}", cont.overlap_error);
        assert!(cont.outbound_slope <= cont.slope_bound);
        let ext =
            maximal_extension(&cb.params, &cont, cb.triple, &IntegrateOptions::default()).unwrap();
        assert!((1.0 + ext.vs + ext.cs).abs() < 1e-10);
        assert!(ext.xs > 0.0 && ext.xs.is_finite());
        assert!(ext.g_crossing.v > 0.0);
    }
}
