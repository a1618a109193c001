//! Downstream side: the trajectory from P∞, the jump locus of the maximal
//! extension, the reflected-shock point P_H, and the post-shock branch.

use serde::{Deserialize, Serialize};

use crate::collapse::gauss_integrate;
use crate::continuation::{BarrierCheck, MaxExtension, OriginPatch};
use crate::error::{Error, Result};
use crate::jump_map::{entropy_check, jump, jump_unchecked};
use crate::ode_engine::{
    integrate_phase, EventKind, EventSpec, IntegrateOptions, Param, State, Trajectory,
};
use crate::phase_plane::{
    branch_vf_plus, branch_vg, critical_points, gamma_g, special_z, Params, PhasePoint,
};
use crate::roots::brent;

/// Distance below C̊ at which the P∞ integration stops.
pub const RING_GAP: f64 = 1e-7;

pub fn vbar_and_sigma(p: &Params) -> (f64, f64) {
    (p.vbar_inf(), p.sigma())
}

pub fn default_c_start(p: &Params) -> Result<f64> {
    let cp = critical_points(p)?;
    Ok(-1e3 * cp.ring_c.abs().max(1.0))
}

/// One Picard iterate of the correction `Ṽ = V - V̄∞` at `c << 0`, i.e. the
/// fixed-point integral evaluated with `Ṽ = 0` inside the kernel.
pub fn tilde_v(p: &Params, c: f64) -> f64 {
    let vb = p.vbar_inf();
    let alpha = 1.0 + p.mf() * p.z / (1.0 + vb);
    let e = (p.mf() + 1.0) / alpha;
    let (g2, f2) = (p.g2(vb), p.f2(vb));
    let u2 = c * c;
    // Substituting u = |C|/s maps the tail integral onto s in (0, 1].
    g2 * gauss_integrate(|s| s.powf(e + 1.0) / (alpha * u2 - f2 * s * s), 0.0, 1.0, 4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinftyBranch {
    /// Samples ordered by increasing C, from `c_start` up to `C̊ - RING_GAP`.
    pub traj: Trajectory,
    pub c_start: f64,
    pub ring: PhasePoint,
    pub endpoint_gap: f64,
}

impl PinftyBranch {
    /// Exact `V∞(c)` by re-integration from the nearest sample.
    pub fn v_at(&self, p: &Params, c: f64, opts: &IntegrateOptions) -> Result<f64> {
        Ok(self.state_at(p, c, opts)?[0])
    }

    pub fn state_at(&self, p: &Params, c: f64, opts: &IntegrateOptions) -> Result<State> {
        self.traj.state_at(p, Param::C, c, opts)
    }

    pub fn c_range(&self) -> (f64, f64) {
        (self.traj.first()[1], self.traj.last()[1])
    }
}

pub fn pinfty_trajectory(
    p: &Params,
    c_start: f64,
    opts: &IntegrateOptions,
) -> Result<PinftyBranch> {
    let cp = critical_points(p)?;
    let c_end = cp.ring_c - RING_GAP;
    if !(c_start < c_end - 1.0) {
        return Err(Error::Domain(format!(
            "C_start = {c_start} must lie well below C̊ = {}",
            cp.ring_c
        )));
    }
    let v0 = p.vbar_inf() + tilde_v(p, c_start);
    let mut o = *opts;
    o.annotate = true;
    let t = integrate_phase(
        p,
        [v0, c_start, 0.0, 0.0],
        (0.0, 1.0),
        &[
            EventSpec::c_level(c_end, true),
            EventSpec::exit_box(-1.0, 1e3, 2.0 * c_start, 0.0),
        ],
        &o,
    )?;
    if !matches!(t.last_event().map(|e| e.kind), Some(EventKind::CLevel(_))) {
        let y = t.last();
        return Err(Error::TheoryViolation(format!(
            "P∞ trajectory left the strip at ({}, {})",
            y[0], y[1]
        )));
    }
    let mut t = t;
    t.events.clear();
    if t.samples
        .windows(2)
        .any(|w| !(w[1][1] > w[0][1] && w[1][0] < w[0][0]))
    {
        return Err(Error::TheoryViolation(
            "V∞ is not strictly decreasing in C".into(),
        ));
    }
    let last = t.last();
    let endpoint_gap = PhasePoint::new(last[0], last[1]).dist(cp.ring);
    Ok(PinftyBranch {
        traj: t,
        c_start,
        ring: cp.ring,
        endpoint_gap,
    })
}

/// Largest violation of `V_G(C) < V∞(C) < V_F+(C)` along the branch, with
/// the upper bound only where V_F+ is defined. Positive means confined.
pub fn confinement_margin(p: &Params, pinf: &PinftyBranch) -> f64 {
    let mut worst = f64::INFINITY;
    for s in &pinf.traj.samples {
        let (v, c) = (s[0], s[1]);
        let scale = 1.0 + v.abs();
        if let Ok(vg) = branch_vg(p, c) {
            worst = worst.min((v - vg) / scale);
        }
        if let Ok(vf) = branch_vf_plus(p, c) {
            worst = worst.min((vf - v) / scale);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusPoint {
    /// Pre-shock state on the maximal extension (with ln|x| and ln R).
    pub pre: State,
    pub post: PhasePoint,
}

/// Image of the maximal extension under the jump map, ordered from the
/// origin side (`P̃1`) to the sonic endpoint `P_s`.
pub fn jump_locus(gamma: f64, patch: &OriginPatch, ext: &MaxExtension) -> Vec<LocusPoint> {
    let mut pre: Vec<State> = (0..12)
        .rev()
        .map(|k| patch.state(-patch.delta * 10f64.powi(-k)))
        .collect();
    pre.pop();
    pre.extend(ext.traj.samples.iter().copied());
    pre.into_iter()
        .map(|s| LocusPoint {
            pre: s,
            post: jump_unchecked(gamma, PhasePoint::new(s[0], s[1])),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub p_h: PhasePoint,
    pub c_h: f64,
    pub pre_state: PhasePoint,
    /// Pre-shock state including ln x and ln R.
    pub pre_full: State,
    pub x_h: f64,
    pub intersection_count: usize,
    pub jump_residual: f64,
    pub entropy_ok: bool,
}

/// Pre-state on the patch or the maximal extension at pre-shock level `c`.
fn pre_at(
    p: &Params,
    patch: &OriginPatch,
    ext: &MaxExtension,
    c: f64,
    opts: &IntegrateOptions,
) -> Result<State> {
    if c >= -patch.delta {
        Ok(patch.state(c))
    } else {
        ext.traj.state_at(p, Param::C, c, opts)
    }
}

pub fn find_ph(
    p: &Params,
    patch: &OriginPatch,
    ext: &MaxExtension,
    pinf: &PinftyBranch,
    gamma_star: f64,
    opts: &IntegrateOptions,
) -> Result<MatchResult> {
    let cp = critical_points(p)?;
    let (c_lo, c_hi) = pinf.c_range();
    let mut o = *opts;
    o.annotate = true;
    let mismatch = |pre: &State| -> Result<Option<f64>> {
        let q = jump_unchecked(p.gamma, PhasePoint::new(pre[0], pre[1]));
        if !(q.c > c_lo && q.c < c_hi) {
            return Ok(None);
        }
        Ok(Some(q.v - pinf.v_at(p, q.c, &o)?))
    };

    let locus = jump_locus(p.gamma, patch, ext);
    let mut vals = Vec::with_capacity(locus.len());
    for lp in &locus {
        vals.push((lp.pre[1], mismatch(&lp.pre)?));
    }
    let mut brackets = Vec::new();
    for w in vals.windows(2) {
        if let (Some(a), Some(b)) = (w[0].1, w[1].1) {
            if a == 0.0 || a.signum() != b.signum() {
                brackets.push((w[0].0, w[1].0));
            }
        }
    }
    let count = brackets.len();
    if count == 0 {
        return Err(Error::TheoryViolation(
            "jump locus never meets the P∞ trajectory".into(),
        ));
    }
    if p.gamma <= gamma_star && count > 1 {
        return Err(Error::TheoryViolation(format!(
            "uniqueness violated: {count} intersections of the jump locus with V∞"
        )));
    }
    let (a, b) = brackets[0];
    let f = |c: f64| -> f64 {
        pre_at(p, patch, ext, c, &o)
            .and_then(|s| mismatch(&s))
            .ok()
            .flatten()
            .unwrap_or(f64::NAN)
    };
    let c_pre = brent(f, a, b, 1e-15, 200)?;
    let pre_full = pre_at(p, patch, ext, c_pre, &o)?;
    let pre = PhasePoint::new(pre_full[0], pre_full[1]);
    let post = jump(p.gamma, pre)?;
    let v_inf = pinf.v_at(p, post.c, &o)?;
    let p_h = PhasePoint::new(v_inf, post.c);
    if !(post.c < cp.ring_c) {
        return Err(Error::TheoryViolation(format!(
            "C_H = {} is not below C̊",
            post.c
        )));
    }
    Ok(MatchResult {
        p_h,
        c_h: post.c,
        pre_state: pre,
        pre_full,
        x_h: pre_full[2].exp(),
        intersection_count: count,
        jump_residual: post.dist(p_h),
        entropy_ok: entropy_check(pre),
    })
}

/// Checks on the jump locus: monotone first coordinate and unique κ-line
/// crossings for γ <= γ*, and P5 lying above the image of `V = -2C²/3`.
pub fn locus_checks(
    p: &Params,
    locus: &[LocusPoint],
    gamma_star: f64,
) -> Result<Vec<BarrierCheck>> {
    let mut out = Vec::new();
    let applies = p.gamma <= gamma_star;
    let mk = |name: &str, margins: Vec<f64>| {
        let worst = margins.into_iter().reduce(f64::min);
        BarrierCheck {
            name: name.into(),
            applicable: true,
            holds: worst.is_none_or(|w| w > 0.0),
            worst,
        }
    };
    let skip = |name: &str| BarrierCheck {
        name: name.into(),
        applicable: false,
        holds: true,
        worst: None,
    };
    // Pre-state C decreases along the locus, so J1 must increase.
    out.push(if applies {
        mk(
            "locus_j1_monotone",
            locus
                .windows(2)
                .map(|w| w[1].post.v - w[0].post.v)
                .collect(),
        )
    } else {
        skip("locus_j1_monotone")
    });
    out.push(if applies {
        let ratio = |q: PhasePoint| -q.c / (1.0 + q.v);
        mk(
            "locus_kappa_lines_unique",
            // The ratio runs from I(0) at the origin image down to 1 at P_s.
            locus
                .windows(2)
                .map(|w| ratio(w[0].post) - ratio(w[1].post))
                .collect(),
        )
    } else {
        skip("locus_kappa_lines_unique")
    });
    let cp = critical_points(p)?;
    let sz = special_z(p.gamma, p.m)?;
    let name = "p5_above_barrier_locus";
    out.push(match cp.p5 {
        Some(p5) if p.gamma >= gamma_g(p.m) && p.z > sz.z_g && p.z <= sz.z_m => {
            let v_lo = (33f64.sqrt() - 7.0) / 4.0;
            let margins = (1..200)
                .map(|k| {
                    let v = v_lo * (1.0 - k as f64 / 200.0);
                    let q = jump_unchecked(p.gamma, PhasePoint::new(v, -(-1.5 * v).sqrt()));
                    q.c * q.c - p5.c * p5.c
                })
                .collect();
            mk(name, margins)
        }
        _ => skip(name),
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Downstream {
    /// From P_H (x = x_H) out to the start of the P∞ integration.
    pub traj: Trajectory,
    pub r_plus: f64,
    /// Log-log slopes over the last decade of x.
    pub tail_c_exponent: f64,
    pub tail_v_exponent: f64,
    pub tail_r_exponent: f64,
    /// Fitted `C̄∞` in `C ~ C̄∞ x^σ`.
    pub c_bar_inf: f64,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn downstream_trajectory(
    p: &Params,
    m: &MatchResult,
    pinf: &PinftyBranch,
    opts: &IntegrateOptions,
) -> Result<Downstream> {
    let mut o = *opts;
    o.annotate = true;
    let head = pinf.state_at(p, m.c_h, &o)?;
    let mut samples = vec![head];
    samples.extend(
        pinf.traj
            .samples
            .iter()
            .rev()
            .filter(|s| s[1] < m.c_h)
            .copied(),
    );
    let mut traj = Trajectory {
        samples,
        ..Default::default()
    };
    traj.attach_x(0, m.x_h)?;
    let r_pre = m.pre_full[3].exp();
    let r_plus = r_pre * (1.0 + m.pre_state.v) / (1.0 + m.p_h.v);
    traj.attach_r(0, r_plus)?;

    let l_end = traj.last()[2];
    let tail: Vec<&State> = traj
        .samples
        .iter()
        .filter(|s| s[2] >= l_end - 10f64.ln())
        .collect();
    if tail.len() < 3 {
        return Err(Error::Annotation(
            "too few tail samples for the downstream fit".into(),
        ));
    }
    let lx: Vec<f64> = tail.iter().map(|s| s[2]).collect();
    let vb = p.vbar_inf();
    let (sc, ic) = ls_slope(&lx, &tail.iter().map(|s| (-s[1]).ln()).collect::<Vec<_>>());
    let (sv, _) = ls_slope(
        &lx,
        &tail
            .iter()
            .map(|s| (s[0] - vb).abs().ln())
            .collect::<Vec<_>>(),
    );
    let (sr, _) = ls_slope(&lx, &tail.iter().map(|s| s[3]).collect::<Vec<_>>());
    Ok(Downstream {
        traj,
        r_plus,
        tail_c_exponent: sc,
        tail_v_exponent: sv,
        tail_r_exponent: sr,
        c_bar_inf: -ic.exp(),
    })
}
