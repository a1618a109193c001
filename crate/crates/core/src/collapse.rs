//! Similarity exponent by shooting through the sonic triple point, and the
//! collapse trajectory from the incoming shock to the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode_engine::{
    integrate_phase, EventKind, EventSpec, IntegrateOptions, State, Trajectory,
};
use crate::origin_series::{match_v1_at, series_coeffs_unchecked, OriginSeries, DEFAULT_ORDER};
use crate::phase_plane::{
    critical_points, p1_state, special_z_with, Params, PhasePoint, Triple, ZInterval,
    GAMMA_STAR_DEFAULT,
};
use crate::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    pub integ: IntegrateOptions,
    /// Stopping tolerance on z.
    pub z_tol: f64,
    pub gamma_star: f64,
    /// Number of scan points across the admissible z-interval.
    pub scan_points: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            integ: IntegrateOptions::default().without_annotations(),
            z_tol: 1e-13,
            gamma_star: GAMMA_STAR_DEFAULT,
            scan_points: 20,
        }
    }
}

impl ShootOptions {
    pub fn with_tol(mut self, z_tol: f64) -> Self {
        self.z_tol = z_tol;
        self
    }

    /// Same options with integrator and z tolerances multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.integ = self.integ.scaled_tolerance(factor);
        self.z_tol *= factor;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    pub gamma: f64,
    pub m: u32,
    pub lambda: f64,
    pub z: f64,
    pub triple: Triple,
    pub miss_residual: f64,
    pub z_interval: ZInterval,
}

impl LambdaResult {
    pub fn params(&self) -> Params {
        Params::from_z(self.gamma, self.m, self.z).expect("converged parameters are valid")
    }
}

/// Signed miss of the trajectory leaving P1 relative to the triple point:
/// `C - C_*` if it reaches `V = V_*` above the sonic line, otherwise the
/// negative gap `V_c - V_*` at its sonic crossing. A trajectory that turns
/// back (G = 0) before either event reports `V_turn - V_*`.
pub fn shoot_miss(
    gamma: f64,
    m: u32,
    z: f64,
    triple: Triple,
    opts: &IntegrateOptions,
) -> Result<f64> {
    let p = Params::from_z(gamma, m, z)?;
    let cp = critical_points(&p)?;
    let star = cp.triple(triple);
    let s = p1_state(gamma);
    let events = [
        EventSpec::sonic_upper(true),
        EventSpec::v_level(star.v, true),
        EventSpec::g_zero(true),
        EventSpec::exit_box(-1.0, 0.0, 0.0, 2.0),
    ];
    let t = integrate_phase(&p, [s.v, s.c, 0.0, 0.0], (1.0, -1.0), &events, opts)?;
    let e = t
        .last_event()
        .ok_or_else(|| Error::Convergence("shooting run ended without event".into()))?;
    match e.kind {
        EventKind::SonicUpper | EventKind::GZero => Ok(e.state[0] - star.v),
        EventKind::VLevel(_) => Ok(e.state[1] - star.c),
        _ => Err(Error::Convergence(format!(
            "shooting trajectory left the admissible strip at ({}, {})",
            e.state[0], e.state[1]
        ))),
    }
}

/// Triple points to try for a given γ.
pub fn candidate_triples(gamma: f64, gamma_star: f64) -> Vec<Triple> {
    if gamma <= gamma_star {
        vec![Triple::P6]
    } else if gamma >= 2.0 {
        vec![Triple::P8]
    } else {
        vec![Triple::P6, Triple::P8]
    }
}

fn shoot_on(
    gamma: f64,
    m: u32,
    triple: Triple,
    iv: ZInterval,
    opts: &ShootOptions,
) -> Result<LambdaResult> {
    let n = opts.scan_points.max(2);
    let mut profile = Vec::with_capacity(n);
    for i in 1..=n {
        let z = iv.lo + (iv.hi - iv.lo) * i as f64 / n as f64;
        let z = if i == n { iv.hi } else { z };
        let miss = shoot_miss(gamma, m, z, triple, &opts.integ).unwrap_or(f64::NAN);
        profile.push((z, miss));
    }
    let bracket = profile
        .windows(2)
        .find(|w| w[0].1.is_finite() && w[1].1.is_finite() && w[0].1.signum() != w[1].1.signum());
    let Some(w) = bracket else {
        return Err(Error::Bracket {
            msg: format!(
                "no sign change of the {triple} miss on ({}, {}]",
                iv.lo, iv.hi
            ),
            profile,
        });
    };
    let f = |z: f64| shoot_miss(gamma, m, z, triple, &opts.integ).unwrap_or(f64::NAN);
    let z = brent(f, w[0].0, w[1].0, opts.z_tol, 300)?;
    let miss = shoot_miss(gamma, m, z, triple, &opts.integ)?;
    let p = Params::from_z(gamma, m, z)?;
    Ok(LambdaResult {
        gamma,
        m,
        lambda: p.lambda,
        z,
        triple,
        miss_residual: miss.abs(),
        z_interval: iv,
    })
}

pub fn find_lambda_std(gamma: f64, m: u32, opts: &ShootOptions) -> Result<LambdaResult> {
    if !(opts.z_tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance {} must be positive",
            opts.z_tol
        )));
    }
    let sz = special_z_with(gamma, m, opts.gamma_star)?;
    let mut last_err = None;
    for triple in candidate_triples(gamma, opts.gamma_star) {
        let iv = match triple {
            Triple::P6 => sz.zring_p6,
            Triple::P8 => sz.zring_p8,
        };
        let Some(iv) = iv else { continue };
        match shoot_on(gamma, m, triple, iv, opts) {
            Ok(r) => return Ok(r),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err
        .unwrap_or_else(|| Error::Domain(format!("no admissible z-interval for gamma = {gamma}"))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    /// Density at the origin at the collapse instant.
    pub r_origin: f64,
    /// `lim V/x` as `x -> 0`.
    pub v1_term: f64,
    /// `-lim C/x` as `x -> 0`.
    pub c1_term: f64,
}

/// Collapse branch from P1 (x = -1) to the handoff circle around the origin,
/// plus the analytic continuation data through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseBranch {
    pub params: Params,
    pub triple: Triple,
    pub traj: Trajectory,
    /// Index of the triple point in `traj.samples`.
    pub triple_index: usize,
    pub series: OriginSeries,
    pub v1: f64,
    /// Handoff radius in C.
    pub delta: f64,
    /// `lim (ln|x| - ln|C|)` at the origin.
    pub h0: f64,
    /// `ln R` at the origin.
    pub q0: f64,
    pub terminal: Terminal,
}

/// Post-shock density of a strong shock into gas at rest with unit density.
pub fn post_shock_density(gamma: f64) -> f64 {
    (gamma + 1.0) / (gamma - 1.0)
}

/// Eigen-data of the linearization of `(G, F)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub mu: [f64; 2],
    pub vec: [(f64, f64); 2],
}

pub fn linearize(p: &Params, at: PhasePoint) -> Result<Linearization> {
    let (gv, gc) = p.grad_g(at.v, at.c);
    let (fv, fc) = p.grad_f(at.v, at.c);
    let tr = gv + fc;
    let det = gv * fc - gc * fv;
    let disc = tr * tr / 4.0 - det;
    if !(disc > 0.0) {
        return Err(Error::Degeneracy(format!(
            "eigenvalues at ({}, {}) are not real and distinct (discriminant {disc})",
            at.v, at.c
        )));
    }
    let r = disc.sqrt();
    let mu = [tr / 2.0 - r, tr / 2.0 + r];
    let mut vec = [(0.0, 0.0); 2];
    for (k, &l) in mu.iter().enumerate() {
        // (gv - l) a + gc b = 0, fv a + (fc - l) b = 0; use the better row.
        let (a, b) = if (gv - l).abs() + gc.abs() >= fv.abs() + (fc - l).abs() {
            (gc, l - gv)
        } else {
            (l - fc, fv)
        };
        let n = a.hypot(b);
        if n == 0.0 {
            return Err(Error::Degeneracy("zero eigenvector".into()));
        }
        vec[k] = (a / n, b / n);
    }
    Ok(Linearization { mu, vec })
}

fn gauss_legendre_20() -> ([f64; 10], [f64; 10]) {
    (
        [
            0.076_526_521_133_497_33,
            0.227_785_851_141_645_08,
            0.373_706_088_715_419_56,
            0.510_867_001_950_827_1,
            0.636_053_680_726_515,
            0.746_331_906_460_150_8,
            0.839_116_971_822_218_8,
            0.912_234_428_251_326,
            0.963_971_927_277_913_8,
            0.993_128_599_185_094_9,
        ],
        [
            0.152_753_387_130_725_85,
            0.149_172_986_472_603_75,
            0.142_096_109_318_382_05,
            0.131_688_638_449_176_63,
            0.118_194_531_961_518_42,
            0.101_930_119_817_240_44,
            0.083_276_741_576_704_75,
            0.062_672_048_334_109_06,
            0.040_601_429_800_386_94,
            0.017_614_007_139_152_12,
        ],
    )
}

/// Integrates `f` over `[a, b]` with composite 20-point Gauss–Legendre on
/// `pieces` sub-intervals.
pub fn gauss_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    let (x, w) = gauss_legendre_20();
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let mid = a + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        for i in 0..10 {
            total += w[i] * (f(mid - half * x[i]) + f(mid + half * x[i]));
        }
    }
    total * 0.5 * h
}

/// Regular part of `d ln|x| / dC` along the series: `-λD/F - 1/C`.
pub fn lnx_regular_part(p: &Params, v: f64, c: f64) -> f64 {
    let denom = p.f2(v) - c * c * p.f1(v); // F = -C * denom
    (p.lambda * p.d(v, c) - denom) / (c * denom)
}

/// `d ln R / dC` along the series written without the `1/C` singularity.
pub fn lnr_slope(p: &Params, s: &OriginSeries, c: f64) -> f64 {
    let (v, dv) = s.eval_unchecked(c);
    let k = (p.mf() + 1.0) / (p.lambda * (1.0 + v));
    let v_over_c = if c == 0.0 { s.v[1] } else { v / c };
    k * (v_over_c + v * lnx_regular_part(p, v, c)) - dv / (1.0 + v)
}

pub fn collapse_trajectory(
    p: &Params,
    triple: Triple,
    opts: &IntegrateOptions,
) -> Result<CollapseBranch> {
    let cp = critical_points(p)?;
    let star = cp.triple(triple);
    let s1 = p1_state(p.gamma);
    let mut integ = *opts;
    integ.annotate = true;

    // Leg A: P1 up to just short of the triple point.
    let eta = 1e-6;
    let leg_a = integrate_phase(
        p,
        [s1.v, s1.c, 0.0, 0.0],
        (1.0, -1.0),
        &[
            EventSpec::v_level(star.v - eta, true),
            EventSpec::sonic_upper(true),
        ],
        &integ,
    )?;
    let a = leg_a.last();
    match leg_a.last_event().map(|e| e.kind) {
        Some(EventKind::VLevel(_)) => {}
        _ => {
            return Err(Error::Convergence(format!(
                "collapse trajectory did not reach {triple}; ended at ({}, {})",
                a[0], a[1]
            )))
        }
    }
    let gap = PhasePoint::new(a[0], a[1]).dist(star);
    if gap > 1e-4 {
        return Err(Error::Convergence(format!(
            "collapse trajectory misses {triple} by {gap}"
        )));
    }

    // Re-seed along the eigen-direction that continues the incoming branch.
    let lin = linearize(p, star)?;
    let tin = ((star.v - a[0]) / gap, (star.c - a[1]) / gap);
    let dots = [
        lin.vec[0].0 * tin.0 + lin.vec[0].1 * tin.1,
        lin.vec[1].0 * tin.0 + lin.vec[1].1 * tin.1,
    ];
    let k = if dots[0].abs() >= dots[1].abs() { 0 } else { 1 };
    let sgn = dots[k].signum();
    let e = (sgn * lin.vec[k].0, sgn * lin.vec[k].1);
    let ratio = (lin.mu[1 - k] / lin.mu[k]).abs();
    let h = 1e-6 * ratio.clamp(1.0, 100.0);

    // Limiting slopes of ln|x| and ln R with respect to V along e.
    let (dv_, dc_) = p.grad_d(star.v, star.c);
    let dd = dv_ * e.0 + dc_ * e.1;
    let dl_dv = -p.lambda * dd / (lin.mu[k] * e.0);
    let kq = (p.mf() + 1.0) * star.v / (p.lambda * (1.0 + star.v));
    let dq_dv = kq * dl_dv - 1.0 / (1.0 + star.v);
    let l_star = a[2] + dl_dv * (star.v - a[0]);
    let q_star = a[3] + dq_dv * (star.v - a[0]);
    let seed: State = [
        star.v + h * e.0,
        star.c + h * e.1,
        l_star + dl_dv * h * e.0,
        q_star + dq_dv * h * e.0,
    ];

    // Leg B: seed toward the origin.
    let c_end = 1e-4;
    let leg_b = integrate_phase(
        p,
        seed,
        e,
        &[
            EventSpec::c_level(c_end, true),
            EventSpec::exit_box(-1.0, 1e-12, 0.0, 2.0),
        ],
        &integ,
    )?;
    match leg_b.last_event().map(|e| e.kind) {
        Some(EventKind::CLevel(_)) => {}
        _ => {
            let b = leg_b.last();
            return Err(Error::Convergence(format!(
                "collapse trajectory left the second quadrant at ({}, {})",
                b[0], b[1]
            )));
        }
    }

    // Match the origin series and truncate at the handoff radius.
    let mut delta = 0.1 * star.c;
    let mut v1 = 0.0;
    let mut series = series_coeffs_unchecked(p, -1.0, DEFAULT_ORDER);
    for _ in 0..20 {
        let y = leg_b.state_at(p, crate::ode_engine::Param::C, delta, &integ)?;
        v1 = match_v1_at(p, triple, PhasePoint::new(y[0], y[1]), DEFAULT_ORDER)?;
        series = series_coeffs_unchecked(p, v1, DEFAULT_ORDER);
        let d_new = series.handoff_radius().min(0.1 * star.c);
        if d_new >= delta * 0.999 {
            break;
        }
        delta = d_new;
    }
    let series = series.trimmed(delta);
    let hand = leg_b.state_at(p, crate::ode_engine::Param::C, delta, &integ)?;

    let mut traj = leg_a;
    traj.events.clear();
    traj.samples.push([star.v, star.c, l_star, q_star]);
    let triple_index = traj.samples.len() - 1;
    let mut b = leg_b;
    b.events.clear();
    b.samples.retain(|s| s[1] > delta);
    b.samples.push(hand);
    traj.extend_with(b);
    traj.attach_x(0, -1.0)?;
    traj.attach_r(0, post_shock_density(p.gamma))?;

    let last = traj.last();
    let h_delta = last[2] - delta.ln();
    let h0 = h_delta
        - gauss_integrate(
            |c| {
                let (v, _) = series.eval_unchecked(c);
                lnx_regular_part(p, v, c)
            },
            0.0,
            delta,
            4,
        );
    let q0 = last[3] - gauss_integrate(|c| lnr_slope(p, &series, c), 0.0, delta, 4);
    let terminal = Terminal {
        r_origin: q0.exp(),
        v1_term: -v1 * (-h0).exp(),
        c1_term: (-h0).exp(),
    };
    Ok(CollapseBranch {
        params: *p,
        triple,
        traj,
        triple_index,
        series,
        v1,
        delta,
        h0,
        q0,
        terminal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_is_supersonic() {
        for g in [1.05, 1.4, 2.0, 3.0] {
            let s = p1_state(g);
            let gap = ((2.0 * g * (g - 1.0)).sqrt() - (g - 1.0)) / (g + 1.0);
            assert!((s.c - (1.0 + s.v) - gap).abs() < 1e-15);
            assert!(gap > 0.0);
        }
        let s = p1_state(1.0 + 1e-9);
        assert!(s.c < 1e-4 && (s.v + 1.0).abs() < 1e-8);
    }

    #[test]
    fn candidate_sets() {
        assert_eq!(candidate_triples(1.4, GAMMA_STAR_DEFAULT), vec![Triple::P6]);
        assert_eq!(
            candidate_triples(1.8, GAMMA_STAR_DEFAULT),
            vec![Triple::P6, Triple::P8]
        );
        assert_eq!(candidate_triples(2.0, GAMMA_STAR_DEFAULT), vec![Triple::P8]);
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let v = gauss_integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1);
        assert!((v - (256.0 / 8.0 - 8.0)).abs() < 1e-12);
    }
}
