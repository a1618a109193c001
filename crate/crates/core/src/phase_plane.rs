//! Similarity parameters, the phase functions D, F, G, critical points and
//! the F = 0 / G = 0 root branches.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::brent;

/// Default value of the threshold exponent separating the P6-only regime
/// from the regime where P8 passage is also possible. Only an enclosure is
/// known, so it is configurable at the call sites that need it.
pub const GAMMA_STAR_DEFAULT: f64 = 5.0 / 3.0;

/// Relative tolerance for algebraic residuals.
pub const ALG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub gamma: f64,
    pub m: u32,
    pub lambda: f64,
    pub z: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub v: f64,
    pub c: f64,
}

impl PhasePoint {
    pub const fn new(v: f64, c: f64) -> Self {
        Self { v, c }
    }

    /// Reflection across the V-axis.
    pub fn reflect(self) -> Self {
        Self::new(self.v, -self.c)
    }

    pub fn dist(self, other: Self) -> f64 {
        (self.v - other.v).hypot(self.c - other.c)
    }
}

fn check_gamma_m(gamma: f64, m: u32) -> Result<()> {
    if !(gamma > 1.0 && gamma <= 3.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in (1, 3]")));
    }
    if m != 1 && m != 2 {
        return Err(Error::Domain(format!("m = {m} must be 1 or 2")));
    }
    Ok(())
}

impl Params {
    pub fn new(gamma: f64, m: u32, lambda: f64) -> Result<Self> {
        check_gamma_m(gamma, m)?;
        if !(lambda > 1.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda = {lambda} must exceed 1")));
        }
        let z = (lambda - 1.0) / (m as f64 * gamma);
        Ok(Self::build(gamma, m, lambda, z))
    }

    pub fn from_z(gamma: f64, m: u32, z: f64) -> Result<Self> {
        check_gamma_m(gamma, m)?;
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Domain(format!("z = {z} must be positive")));
        }
        let lambda = 1.0 + m as f64 * gamma * z;
        Ok(Self::build(gamma, m, lambda, z))
    }

    fn build(gamma: f64, m: u32, lambda: f64, z: f64) -> Self {
        let mf = m as f64;
        Self {
            gamma,
            m,
            lambda,
            z,
            a1: 1.0 + mf * (gamma - 1.0) / 2.0,
            a2: (mf * (gamma - 1.0) + mf * gamma * z * (gamma - 3.0)) / 2.0,
            a3: mf * gamma * z * (gamma - 1.0) / 2.0,
        }
    }

    #[inline]
    pub fn mf(&self) -> f64 {
        self.m as f64
    }

    #[inline]
    pub fn d(&self, v: f64, c: f64) -> f64 {
        (1.0 + v) * (1.0 + v) - c * c
    }

    #[inline]
    pub fn g1(&self, v: f64) -> f64 {
        (self.mf() + 1.0) * v + 2.0 * self.mf() * self.z
    }

    #[inline]
    pub fn g2(&self, v: f64) -> f64 {
        v * (1.0 + v) * (self.lambda + v)
    }

    #[inline]
    pub fn g(&self, v: f64, c: f64) -> f64 {
        c * c * self.g1(v) - self.g2(v)
    }

    #[inline]
    pub fn f1(&self, v: f64) -> f64 {
        1.0 + self.mf() * self.z / (1.0 + v)
    }

    #[inline]
    pub fn f2(&self, v: f64) -> f64 {
        let u = 1.0 + v;
        self.a1 * u * u - self.a2 * u + self.a3
    }

    #[inline]
    pub fn f(&self, v: f64, c: f64) -> f64 {
        c * (c * c * self.f1(v) - self.f2(v))
    }

    /// `(1+V) F`, which is polynomial in V.
    #[inline]
    pub fn f_times_1pv(&self, v: f64, c: f64) -> f64 {
        let u = 1.0 + v;
        c * (c * c * (u + self.mf() * self.z) - u * self.f2(v))
    }

    pub fn eval_dfg(&self, p: PhasePoint) -> Result<(f64, f64, f64)> {
        if p.v == -1.0 {
            return Err(Error::Pole("F"));
        }
        Ok((self.d(p.v, p.c), self.f(p.v, p.c), self.g(p.v, p.c)))
    }

    /// Partial derivatives `(G_V, G_C)`.
    pub fn grad_g(&self, v: f64, c: f64) -> (f64, f64) {
        let dg2 = 3.0 * v * v + 2.0 * (1.0 + self.lambda) * v + self.lambda;
        ((self.mf() + 1.0) * c * c - dg2, 2.0 * c * self.g1(v))
    }

    /// Partial derivatives `(F_V, F_C)`.
    pub fn grad_f(&self, v: f64, c: f64) -> (f64, f64) {
        let u = 1.0 + v;
        let df1 = -self.mf() * self.z / (u * u);
        let df2 = 2.0 * self.a1 * u - self.a2;
        (
            c * c * c * df1 - c * df2,
            3.0 * c * c * self.f1(v) - self.f2(v),
        )
    }

    pub fn grad_d(&self, v: f64, c: f64) -> (f64, f64) {
        (2.0 * (1.0 + v), -2.0 * c)
    }

    /// `V̄∞ = -2mz/(m+1)`.
    pub fn vbar_inf(&self) -> f64 {
        -2.0 * self.mf() * self.z / (self.mf() + 1.0)
    }

    /// Tail exponent `σ = (1 + mz/(1+V̄∞))/λ`.
    pub fn sigma(&self) -> f64 {
        (1.0 + self.mf() * self.z / (1.0 + self.vbar_inf())) / self.lambda
    }

    /// `w(z)² = (1 - (√2+√γ)² z)(1 - (√2-√γ)² z)`; negative beyond `z_M`.
    pub fn w_squared(&self) -> f64 {
        let (sp, sm) = root_sums(self.gamma);
        (1.0 - self.z * sp) * (1.0 - self.z * sm)
    }
}

/// Post-shock state of a strong shock running into gas at rest.
pub fn p1_state(gamma: f64) -> PhasePoint {
    PhasePoint::new(
        -2.0 / (gamma + 1.0),
        (2.0 * gamma * (gamma - 1.0)).sqrt() / (gamma + 1.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Triple {
    P6,
    P8,
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Triple::P6 => write!(f, "P6"),
            Triple::P8 => write!(f, "P8"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSet {
    pub p0: PhasePoint,
    pub p1: PhasePoint,
    pub p2: PhasePoint,
    pub p3: PhasePoint,
    /// `None` when `g2(V4)/g1(V4) < 0` (no real P4/P5).
    pub p4: Option<PhasePoint>,
    pub p5: Option<PhasePoint>,
    pub p6: PhasePoint,
    pub p7: PhasePoint,
    pub p8: PhasePoint,
    pub p9: PhasePoint,
    pub vbar_inf: f64,
    pub w: f64,
    pub ring: PhasePoint,
    pub ring_c: f64,
    /// True when the ring point is P5, false when it is P9.
    pub ring_is_p5: bool,
}

impl CriticalPointSet {
    pub fn triple(&self, which: Triple) -> PhasePoint {
        match which {
            Triple::P6 => self.p6,
            Triple::P8 => self.p8,
        }
    }
}

pub fn critical_points(p: &Params) -> Result<CriticalPointSet> {
    let g = p.gamma;
    let z = p.z;
    let w2 = p.w_squared();
    if w2 < -1e-14 {
        return Err(Error::Domain(format!("z = {z} exceeds z_M (w^2 = {w2})")));
    }
    let w = w2.max(0.0).sqrt();
    let v6 = (-1.0 + (g - 2.0) * z - w) / 2.0;
    let v8 = (-1.0 + (g - 2.0) * z + w) / 2.0;
    let p6 = PhasePoint::new(v6, 1.0 + v6);
    let p8 = PhasePoint::new(v8, 1.0 + v8);

    let v4 = -2.0 * p.lambda / (g + 1.0 + p.mf() * (g - 1.0));
    let rad = p.g2(v4) / p.g1(v4);
    let p4 = (rad >= 0.0).then(|| PhasePoint::new(v4, rad.sqrt()));
    let p5 = p4.map(|q| q.reflect());
    let p9 = p8.reflect();
    let (ring, ring_is_p5) = match p5 {
        Some(q) if p9.c >= q.c => (q, true),
        _ => (p9, false),
    };
    Ok(CriticalPointSet {
        p0: PhasePoint::new(0.0, 0.0),
        p1: p1_state(g),
        p2: PhasePoint::new(-1.0, 0.0),
        p3: PhasePoint::new(-p.lambda, 0.0),
        p4,
        p5,
        p6,
        p7: p6.reflect(),
        p8,
        p9,
        vbar_inf: p.vbar_inf(),
        w,
        ring,
        ring_c: ring.c,
        ring_is_p5,
    })
}

/// Half-open z-interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ZInterval {
    pub fn contains(&self, z: f64) -> bool {
        z > self.lo && z <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialZ {
    pub z_m: f64,
    pub z_g: f64,
    pub z_0: f64,
    pub gamma_g: f64,
    pub gamma_u: f64,
    pub zring_p6: Option<ZInterval>,
    pub zring_p8: Option<ZInterval>,
}

/// `((√2+√γ)², (√2-√γ)²)`.
fn root_sums(gamma: f64) -> (f64, f64) {
    let (a, b) = (2f64.sqrt(), gamma.sqrt());
    ((a + b) * (a + b), (a - b) * (a - b))
}

/// Smallest double at which the factored `w²` stops being positive, so that
/// `w(z_M) = 0` holds exactly in floating point.
pub fn z_m(gamma: f64) -> f64 {
    let (sp, _) = root_sums(gamma);
    let mut z = 1.0 / sp;
    while 1.0 - z * sp > 0.0 {
        z = f64::from_bits(z.to_bits() + 1);
    }
    loop {
        let down = f64::from_bits(z.to_bits() - 1);
        if 1.0 - down * sp > 0.0 {
            return z;
        }
        z = down;
    }
}

pub fn z_g(gamma: f64, m: u32) -> f64 {
    let g = gamma;
    if m == 1 {
        ((g * g + (g - 1.0) * (g - 1.0)).sqrt() - g) / (g * (g - 1.0))
    } else {
        let b = 2.0 * g * g - g + 1.0;
        let k = 4.0 * g * (g - 1.0) + 8.0 / 3.0;
        ((b * b + 2.0 * g * (g - 1.0) * k).sqrt() - b) / (g * k)
    }
}

pub fn z_0(gamma: f64) -> f64 {
    (22.0 - 5.0 * gamma) / 125.0
}

/// `z_s`: `z_0` below `γ_u`, `z_g` from `γ_u` on.
pub fn z_s(gamma: f64, m: u32) -> f64 {
    if gamma < gamma_u(m) {
        z_0(gamma)
    } else {
        z_g(gamma, m)
    }
}

fn horner(coeffs_desc: &[f64], x: f64) -> f64 {
    coeffs_desc.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Exponent at which `z_0 = z_g`, the root of the defining polynomial inside
/// its rational bracket. Cached per m.
pub fn gamma_u(m: u32) -> f64 {
    static CACHE: [OnceLock<f64>; 2] = [OnceLock::new(), OnceLock::new()];
    let idx = if m == 1 { 0 } else { 1 };
    *CACHE[idx].get_or_init(|| {
        if m == 1 {
            let c = [25.0, -245.0, -546.0, 5016.0, -15625.0, 15625.0];
            brent(|g| horner(&c, g), 79.0 / 50.0, 159.0 / 100.0, 1e-15, 200)
                .expect("gamma_u bracket (m = 1)")
        } else {
            let c = [
                450.0, -4860.0, 6432.0, 39111.0, -207817.0, 359749.0, -275503.0, 110250.0,
            ];
            brent(|g| horner(&c, g), 77.0 / 50.0, 31.0 / 20.0, 1e-15, 200)
                .expect("gamma_u bracket (m = 2)")
        }
    })
}

/// Exponent in (5/2, 3) at which `V_4 = V_6 = V_8` (all three meet at `z_M`).
pub fn gamma_g(m: u32) -> f64 {
    static CACHE: [OnceLock<f64>; 2] = [OnceLock::new(), OnceLock::new()];
    let idx = if m == 1 { 0 } else { 1 };
    *CACHE[idx].get_or_init(|| {
        let mf = m as f64;
        let f = |g: f64| {
            let s = 2f64.sqrt() + g.sqrt();
            let lam = 1.0 + mf * g / (s * s);
            -2.0 * lam / (g + 1.0 + mf * (g - 1.0)) + 2f64.sqrt() / s
        };
        brent(f, 2.5, 3.0, 1e-15, 200).expect("gamma_g bracket")
    })
}

pub fn special_z(gamma: f64, m: u32) -> Result<SpecialZ> {
    special_z_with(gamma, m, GAMMA_STAR_DEFAULT)
}

pub fn special_z_with(gamma: f64, m: u32, gamma_star: f64) -> Result<SpecialZ> {
    check_gamma_m(gamma, m)?;
    let zm = z_m(gamma);
    let zg = z_g(gamma, m);
    let zring_p6 = (gamma <= 2.0).then_some(ZInterval { lo: zg, hi: zm });
    let s5 = 5f64.sqrt();
    let s33 = 33f64.sqrt();
    let zring_p8 = if gamma > gamma_star && gamma <= 1.0 + 2f64.sqrt() {
        Some(ZInterval {
            lo: (s5 - 1.0) / (2.0 * (1.0 + s5 + gamma)),
            hi: zm,
        })
    } else if gamma > 1.0 + 2f64.sqrt() {
        Some(ZInterval {
            lo: (s33 - 3.0) / (6.0 + 2.0 * s33 + 4.0 * gamma),
            hi: zm,
        })
    } else {
        None
    };
    Ok(SpecialZ {
        z_m: zm,
        z_g: zg,
        z_0: z_0(gamma),
        gamma_g: gamma_g(m),
        gamma_u: gamma_u(m),
        zring_p6,
        zring_p8,
    })
}

/// Newton polish of a bracketed root of a smooth function.
fn polish<F, DF>(f: F, df: DF, mut x: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    DF: Fn(f64) -> f64,
{
    for _ in 0..4 {
        let d = df(x);
        if d == 0.0 {
            break;
        }
        let nx = x - f(x) / d;
        if !(nx >= lo && nx <= hi) {
            break;
        }
        x = nx;
    }
    x
}

/// `C_F(V) = -sqrt(f2/f1)`, the lower F = 0 curve written over V.
pub fn c_f(p: &Params, v: f64) -> f64 {
    -(p.f2(v) / p.f1(v)).sqrt()
}

/// Root of F = 0 on the branch through `(0, -sqrt((1+mγz)/(1+mz)))`.
pub fn branch_vf_plus(p: &Params, c: f64) -> Result<f64> {
    let cp = critical_points(p)?;
    let c_lo = -((1.0 + p.mf() * p.gamma * p.z) / (1.0 + p.mf() * p.z)).sqrt();
    if !(c >= c_lo * (1.0 + 1e-14) && c < cp.p9.c) {
        return Err(Error::Domain(format!(
            "C = {c} outside V_F+ domain [{c_lo}, {})",
            cp.p9.c
        )));
    }
    if c <= c_lo {
        return Ok(0.0);
    }
    // (1+V)F/C = C²(1+V+mz) - (1+V) f2(V), cubic in V.
    let h = |v: f64| {
        let u = 1.0 + v;
        c * c * (u + p.mf() * p.z) - u * p.f2(v)
    };
    let dh = |v: f64| {
        let u = 1.0 + v;
        c * c - p.f2(v) - u * (2.0 * p.a1 * u - p.a2)
    };
    let (lo, hi) = (cp.p9.v, 0.0);
    let r = brent(h, lo, hi, 1e-16, 200)?;
    Ok(polish(h, dh, r, lo, hi))
}

fn g_cubic(p: &Params, c: f64) -> impl Fn(f64) -> f64 + '_ {
    move |v: f64| -(p.g(v, c))
}

/// Root of G = 0 in `(-1, V̄∞)` for `C < 0`.
pub fn branch_vg(p: &Params, c: f64) -> Result<f64> {
    if !(c < 0.0) {
        return Err(Error::Domain(format!("V_G requires C < 0, got {c}")));
    }
    let h = g_cubic(p, c);
    let dh = |v: f64| -p.grad_g(v, c).0;
    let (lo, hi) = (-1.0, p.vbar_inf());
    let r = brent(&h, lo, hi, 1e-16, 200)?;
    Ok(polish(&h, dh, r, lo, hi))
}

/// Root of G = 0 in `(0, ∞)` for `C < 0`.
pub fn branch_vg_plus(p: &Params, c: f64) -> Result<f64> {
    if !(c < 0.0) {
        return Err(Error::Domain(format!("V_G+ requires C < 0, got {c}")));
    }
    let h = g_cubic(p, c);
    let dh = |v: f64| -p.grad_g(v, c).0;
    let mut hi = 1.0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e200 {
            return Err(Error::Convergence("V_G+ bracket".into()));
        }
    }
    let r = brent(&h, 0.0, hi, 1e-16, 300)?;
    Ok(polish(&h, dh, r, 0.0, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn make_params_examples() {
        let p = Params::new(3.0, 2, 1.6).unwrap();
        assert!(close(p.z, 0.1, 1e-15));
        assert!(Params::new(2.0, 1, 1.0).is_err());
        let p = Params::new(1.4, 2, 1.39).unwrap();
        assert!(close(p.a1, 1.4, 1e-15));
        assert!(matches!(Params::new(0.9, 2, 1.5), Err(Error::Domain(_))));
        assert!(matches!(Params::new(1.4, 3, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn g_hand_value() {
        let p = Params::new(3.0, 2, 1.6).unwrap();
        let (_, _, g) = p.eval_dfg(PhasePoint::new(-0.5, 0.4)).unwrap();
        assert!(close(g, 0.099, 1e-13));
    }

    #[test]
    fn origin_is_double_root() {
        let p = Params::from_z(1.7, 1, 0.1).unwrap();
        let (d, f, g) = p.eval_dfg(PhasePoint::new(0.0, 0.0)).unwrap();
        assert_eq!((d, f, g), (1.0, 0.0, 0.0));
        assert!(matches!(
            p.eval_dfg(PhasePoint::new(-1.0, 0.3)),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn f2_at_zero_is_lambda() {
        let p = Params::from_z(2.2, 2, 0.07).unwrap();
        assert!(close(p.f2(0.0), p.lambda, 1e-15));
    }

    #[test]
    fn merged_triple_point_at_z_m() {
        let p = Params::from_z(3.0, 1, z_m(3.0)).unwrap();
        let cp = critical_points(&p).unwrap();
        let vm = -(2f64.sqrt()) / (2f64.sqrt() + 3f64.sqrt());
        assert!(close(cp.p6.v, vm, 1e-7));
        assert!(close(cp.p8.v, vm, 1e-7));
        assert!(cp.w < 1e-7);
    }

    #[test]
    fn p1_for_gamma_three() {
        let p1 = p1_state(3.0);
        assert!(close(p1.v, -0.5, 1e-15));
        assert!(close(p1.c, 3f64.sqrt() / 2.0, 1e-15));
    }

    #[test]
    fn vbar_and_sigma_examples() {
        let p = Params::from_z(1.4, 2, 0.1).unwrap();
        assert!(close(p.vbar_inf(), -0.4 / 3.0, 1e-15));
        let p = Params::new(3.0, 2, 1.6).unwrap();
        assert!(close(
            p.sigma(),
            (1.0 + 0.2 / (1.0 - 0.4 / 3.0)) / 1.6,
            1e-14
        ));
        assert!(p.sigma() > 1.0 / p.lambda);
        let p = Params::from_z(1.4, 1, 0.1).unwrap();
        assert!(close(p.vbar_inf(), -0.1, 1e-15));
    }

    #[test]
    fn special_values() {
        let s = special_z(2.0, 1).unwrap();
        assert!(close(s.z_m, 0.125, 1e-15));
        assert!(close(s.z_0, 12.0 / 125.0, 1e-15));
        assert!(s.gamma_u > 79.0 / 50.0 && s.gamma_u < 159.0 / 100.0);
        let s2 = special_z(2.0, 2).unwrap();
        assert!(s2.gamma_u > 77.0 / 50.0 && s2.gamma_u < 31.0 / 20.0);
        for m in [1, 2] {
            let gg = gamma_g(m);
            assert!(gg > 2.5 && gg < 3.0);
        }
    }

    #[test]
    fn z0_meets_zg_at_gamma_u() {
        for m in [1, 2] {
            let gu = gamma_u(m);
            assert!((z_0(gu) - z_g(gu, m)).abs() < 1e-12);
        }
    }

    #[test]
    fn zg_makes_v4_equal_v6() {
        for (g, m) in [(1.3, 1), (1.9, 2), (2.4, 1)] {
            let p = Params::from_z(g, m, z_g(g, m)).unwrap();
            let cp = critical_points(&p).unwrap();
            assert!((cp.p4.unwrap().v - cp.p6.v).abs() < 1e-10, "{g} {m}");
        }
    }

    #[test]
    fn branch_limits() {
        let p = Params::from_z(1.5, 2, 0.12).unwrap();
        let c_lo = -((1.0 + 2.0 * 1.5 * 0.12) / (1.0 + 2.0 * 0.12f64)).sqrt();
        assert_eq!(branch_vf_plus(&p, c_lo).unwrap(), 0.0);
        let v = branch_vg(&p, -5.0).unwrap();
        assert!(p.g(v, -5.0).abs() < 1e-12);
        assert!(branch_vg(&p, -1e-6).unwrap() + 1.0 < 1e-6);
        assert!(branch_vg_plus(&p, -1e-6).unwrap() < 1e-6);
        assert!(branch_vg(&p, 0.1).is_err());
    }
}
