//! Exact rational polynomials, Sturm and Budan–Fourier root counting, and
//! the bundled certification suite for the sign conditions the solver relies
//! on.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Exact rational obtained by rounding `x` to `digits` decimals.
pub fn q_decimal(x: f64, digits: u32) -> Q {
    let scale = 10f64.powi(digits as i32);
    let n = (x * scale).round();
    Q::new(BigInt::from(n as i128), BigInt::from(10).pow(digits))
}

/// Univariate polynomial with exact rational coefficients, ascending degree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RationalPoly {
    coeffs: Vec<Q>,
}

impl RationalPoly {
    pub fn new(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    /// From integer coefficients listed from the highest degree down.
    pub fn from_desc(c: &[i64]) -> Self {
        Self::new(c.iter().rev().map(|&v| qi(v)).collect())
    }

    pub fn constant(c: Q) -> Self {
        Self::new(vec![c])
    }

    pub fn x() -> Self {
        Self::new(vec![Q::zero(), Q::one()])
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Q {
        self.coeffs.last().cloned().unwrap_or_else(Q::zero)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs
            .iter()
            .rev()
            .fold(Q::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * qi(i as i64))
                .collect(),
        )
    }

    pub fn scale(&self, k: &Q) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(Q::one()), |acc, _| &acc * self)
    }

    /// `self(inner(x))`.
    pub fn compose(&self, inner: &Self) -> Self {
        self.coeffs.iter().rev().fold(Self::zero(), |acc, c| {
            &(&acc * inner) + &Self::constant(c.clone())
        })
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let dd = d.coeffs.len() - 1;
        let lead = d.leading();
        let mut r = self.coeffs.clone();
        let mut quo = vec![Q::zero(); r.len().saturating_sub(dd)];
        while r.len() > dd && !r.is_empty() {
            let k = r.len() - 1 - dd;
            let f = r.last().unwrap() / &lead;
            for (i, c) in d.coeffs.iter().enumerate() {
                r[k + i] -= &f * c;
            }
            quo[k] = f;
            r.pop();
            while r.last().is_some_and(|c| c.is_zero()) {
                r.pop();
            }
        }
        (Self::new(quo), Self::new(r))
    }

    /// Positive rescaling with unit leading magnitude; signs are unchanged.
    fn normalized(&self) -> Self {
        let l = self.leading().abs();
        if l.is_zero() {
            self.clone()
        } else {
            self.scale(&l.recip())
        }
    }

    fn sign_at(&self, x: &Q) -> i8 {
        sign(&self.eval(x))
    }
}

fn sign(v: &Q) -> i8 {
    if v.is_positive() {
        1
    } else if v.is_negative() {
        -1
    } else {
        0
    }
}

impl fmt::Display for RationalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                write!(f, "{}", if neg { "-" } else { "" })?;
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let show = !a.is_one() || i == 0;
            if show {
                write!(f, "{a}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "{}x", if show { "*" } else { "" })?,
                _ => write!(f, "{}x^{i}", if show { "*" } else { "" })?,
            }
        }
        Ok(())
    }
}

impl Add for &RationalPoly {
    type Output = RationalPoly;
    fn add(self, o: &RationalPoly) -> RationalPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        let z = Q::zero();
        RationalPoly::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&z) + o.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }
}

impl Sub for &RationalPoly {
    type Output = RationalPoly;
    fn sub(self, o: &RationalPoly) -> RationalPoly {
        self + &(-o)
    }
}

impl Neg for &RationalPoly {
    type Output = RationalPoly;
    fn neg(self) -> RationalPoly {
        RationalPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Mul for &RationalPoly {
    type Output = RationalPoly;
    fn mul(self, o: &RationalPoly) -> RationalPoly {
        if self.is_zero() || o.is_zero() {
            return RationalPoly::zero();
        }
        let mut out = vec![Q::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RationalPoly::new(out)
    }
}

/// Signed remainder sequence of `(p, p')`, each term rescaled positively.
pub fn sturm_chain(p: &RationalPoly) -> Vec<RationalPoly> {
    let mut chain = vec![p.normalized()];
    if p.degree().unwrap_or(0) == 0 {
        return chain;
    }
    chain.push(p.derivative().normalized());
    loop {
        let n = chain.len();
        let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
        if r.is_zero() {
            break;
        }
        chain.push((-&r).normalized());
    }
    chain
}

fn variations(signs: impl IntoIterator<Item = i8>) -> usize {
    let mut last = 0i8;
    let mut n = 0;
    for s in signs.into_iter().filter(|&s| s != 0) {
        if last != 0 && s != last {
            n += 1;
        }
        last = s;
    }
    n
}

fn check_endpoints(p: &RationalPoly, a: &Q, b: &Q) -> Result<()> {
    if p.is_zero() {
        return Err(Error::Endpoint(
            "the zero polynomial has no finite root count".into(),
        ));
    }
    if a >= b {
        return Err(Error::Endpoint(format!("empty interval ({a}, {b})")));
    }
    for e in [a, b] {
        if p.eval(e).is_zero() {
            return Err(Error::Endpoint(format!(
                "polynomial vanishes at endpoint {e}"
            )));
        }
    }
    Ok(())
}

/// Number of distinct real roots in `(a, b)`. Zeros of intermediate chain
/// terms at the endpoints are harmless; a zero of `p` itself is an error.
pub fn sturm_root_count(p: &RationalPoly, a: &Q, b: &Q) -> Result<usize> {
    check_endpoints(p, a, b)?;
    let chain = sturm_chain(p);
    let va = variations(chain.iter().map(|s| s.sign_at(a)));
    let vb = variations(chain.iter().map(|s| s.sign_at(b)));
    Ok(va - vb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudanFourier {
    /// `|V_a - V_b|`: an upper bound on the number of roots in `(a, b]`,
    /// counted with multiplicity.
    pub bound: usize,
    /// The root count has the parity of `bound`.
    pub parity: usize,
}

pub fn budan_fourier_count(p: &RationalPoly, a: &Q, b: &Q) -> Result<BudanFourier> {
    check_endpoints(p, a, b)?;
    let mut seq = vec![p.clone()];
    while seq.last().unwrap().degree().unwrap_or(0) > 0 {
        let d = seq.last().unwrap().derivative();
        seq.push(d);
    }
    let va = variations(seq.iter().map(|s| s.sign_at(a)));
    let vb = variations(seq.iter().map(|s| s.sign_at(b)));
    let bound = va.abs_diff(vb);
    Ok(BudanFourier {
        bound,
        parity: bound % 2,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Q,
    pub hi: Q,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn open(lo: Q, hi: Q) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }
    pub fn closed(lo: Q, hi: Q) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }
    pub fn left_open(lo: Q, hi: Q) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: true,
        }
    }
    pub fn right_open(lo: Q, hi: Q) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { "[" } else { "(" },
            self.lo,
            self.hi,
            if self.hi_closed { "]" } else { ")" }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    fn value(self) -> i8 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignCertificate {
    pub holds: bool,
    /// Distinct roots inside the open interval after deflating roots that
    /// sit exactly on an open endpoint.
    pub roots: usize,
    pub isolating: Option<(Q, Q)>,
    pub reason: Option<String>,
}

/// Divides out every factor `(x - e)` with `p(e) = 0`.
fn deflate(p: &RationalPoly, e: &Q) -> RationalPoly {
    let lin = RationalPoly::new(vec![-e.clone(), Q::one()]);
    let mut p = p.clone();
    while !p.is_zero() && p.eval(e).is_zero() {
        p = p.div_rem(&lin).0;
    }
    p
}

fn isolate_one(p: &RationalPoly, mut a: Q, mut b: Q) -> (Q, Q) {
    let two = qi(2);
    for _ in 0..200 {
        let m = (&a + &b) / &two;
        if p.eval(&m).is_zero() {
            return (m.clone(), m);
        }
        match sturm_root_count(p, &a, &m) {
            Ok(0) => a = m,
            Ok(1) => return (a, m),
            _ => b = m,
        }
    }
    (a, b)
}

/// Certifies that `p` keeps `claimed` sign on `iv`: no root inside, one
/// exact midpoint evaluation, and the sign at every closed endpoint.
pub fn certify_sign(p: &RationalPoly, iv: &Interval, claimed: Sign) -> Result<SignCertificate> {
    if p.is_zero() {
        return Err(Error::Endpoint(
            "cannot certify the sign of the zero polynomial".into(),
        ));
    }
    let want = claimed.value();
    let fail = |reason: String| SignCertificate {
        holds: false,
        roots: 0,
        isolating: None,
        reason: Some(reason),
    };
    for (e, closed) in [(&iv.lo, iv.lo_closed), (&iv.hi, iv.hi_closed)] {
        if closed && p.sign_at(e) != want {
            return Ok(fail(format!(
                "value at closed endpoint {e} has the wrong sign"
            )));
        }
    }
    let core = deflate(&deflate(p, &iv.lo), &iv.hi);
    let roots = sturm_root_count(&core, &iv.lo, &iv.hi)?;
    if roots > 0 {
        let iso = isolate_one(&core, iv.lo.clone(), iv.hi.clone());
        return Ok(SignCertificate {
            holds: false,
            roots,
            isolating: Some(iso),
            reason: Some("root inside the interval".into()),
        });
    }
    let mid = (&iv.lo + &iv.hi) / qi(2);
    if p.sign_at(&mid) != want {
        return Ok(SignCertificate {
            roots,
            ..fail("midpoint value has the wrong sign".into())
        });
    }
    Ok(SignCertificate {
        holds: true,
        roots,
        isolating: None,
        reason: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sturm,
    Budan,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertReport {
    pub id: String,
    pub interval: String,
    pub method: Method,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub items: Vec<CertReport>,
    pub passed: usize,
    pub failed: usize,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    /// Converts failures into a single error naming the failed items.
    pub fn into_result(self) -> Result<Self> {
        if self.all_passed() {
            return Ok(self);
        }
        let ids: Vec<_> = self
            .items
            .iter()
            .filter(|r| r.status == Status::Fail)
            .map(|r| r.id.clone())
            .collect();
        Err(Error::TheoryViolation(format!(
            "certification failed for {}",
            ids.join(", ")
        )))
    }
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn sign_item(id: &str, p: &RationalPoly, iv: Interval, s: Sign) -> CertReport {
    let (st, detail) = match certify_sign(p, &iv, s) {
        Ok(c) if c.holds => (Status::Pass, format!("{s:?} on interval, 0 roots")),
        Ok(c) => (
            Status::Fail,
            format!(
                "{}; roots = {}{}",
                c.reason.unwrap_or_default(),
                c.roots,
                c.isolating
                    .map(|(a, b)| format!(", isolated in [{a}, {b}]"))
                    .unwrap_or_default()
            ),
        ),
        Err(e) => (Status::Fail, e.to_string()),
    };
    CertReport {
        id: id.into(),
        interval: iv.to_string(),
        method: Method::Sturm,
        status: st,
        detail,
    }
}

fn count_item(id: &str, p: &RationalPoly, a: Q, b: Q, expected: usize) -> CertReport {
    let iv = Interval::open(a.clone(), b.clone());
    let (st, detail) = match sturm_root_count(p, &a, &b) {
        Ok(n) => (
            status(n == expected),
            format!("{n} distinct roots, expected {expected}"),
        ),
        Err(e) => (Status::Fail, e.to_string()),
    };
    CertReport {
        id: id.into(),
        interval: iv.to_string(),
        method: Method::Sturm,
        status: st,
        detail,
    }
}

fn identity_item(id: &str, lhs: &RationalPoly, rhs: &RationalPoly) -> CertReport {
    let diff = lhs - rhs;
    CertReport {
        id: id.into(),
        interval: "all".into(),
        method: Method::Identity,
        status: status(diff.is_zero()),
        detail: if diff.is_zero() {
            "exact polynomial identity".into()
        } else {
            format!("difference {diff}")
        },
    }
}

fn poly(c: &[i64]) -> RationalPoly {
    RationalPoly::from_desc(c)
}

fn lin(a: Q, b: Q) -> RationalPoly {
    // a + b γ
    RationalPoly::new(vec![a, b])
}

fn cst(v: Q) -> RationalPoly {
    RationalPoly::constant(v)
}

/// `z₀(γ) = (22 - 5γ)/125`.
fn z0_poly() -> RationalPoly {
    lin(q(22, 125), q(-5, 125))
}

/// `w(z)² = (γ-2)² z² - 2(γ+2) z + 1` with `z` a polynomial in γ.
fn w2_of(z: &RationalPoly) -> RationalPoly {
    let gm2 = lin(qi(-2), qi(1));
    let gp2 = lin(qi(2), qi(1));
    let a = &(&gm2 * &gm2) * &(z * z);
    let b = &(&gp2 * z).scale(&qi(2));
    &(&a - b) + &cst(Q::one())
}

/// Sextic in C at fixed rational `(γ, z)`.
pub fn sextic_b(m: u32, gamma: &Q, z: &Q) -> RationalPoly {
    let (m, g, z) = (qi(m as i64), gamma.clone(), z.clone());
    let one = Q::one();
    let c6 = qi(2) * (&m * (&g - &one) + &one);
    let c5 = qi(7) * &m * (&g - &one) + qi(6);
    let c4 = qi(5) * &m * &g - qi(3) * &m - qi(2) + qi(2) * &m * (&g - qi(2)) * &g * &z;
    let c3 = &m * (qi(5) * &g - qi(9)) * (&g * &z - &one) - qi(12);
    let c2 = qi(5) * &m * (&one - &g) + qi(2) + qi(2) * &m * &g * &g * &z;
    let c1 = &m * (&g - qi(3)) + qi(6) - &m * (qi(2) * &g * &g - qi(6) * &g + qi(2)) * &z;
    let c0 = &m * (&g - &one) - qi(2) - &m * (&g * &g + &g - qi(4)) * &z;
    RationalPoly::new(vec![c0, c1, c2, c3, c4, c5, c6])
}

/// Quartic in V at fixed rational `(γ, z)`.
pub fn quartic_p(m: u32, gamma: &Q, z: &Q) -> RationalPoly {
    let (m, g, z) = (qi(m as i64), gamma.clone(), z.clone());
    let one = Q::one();
    let g2 = &g * &g;
    let c4 = qi(-4) * (&g - &one);
    let c3 = (&m - &one) * &g2 - (&m + qi(11)) * &g + qi(16) + qi(4) * &m * &g * (&one - &g) * &z;
    let c2 = (qi(2) * &m - &one) * &g2 - (qi(2) * &m + qi(10)) * &g + qi(24)
        - qi(2) * &m * &g * (&g2 + qi(4) * &g - qi(7)) * &z;
    let c1 =
        &m * &g2 - (qi(3) + &m) * &g + qi(16) - &m * &g * (qi(2) * &g2 + qi(5) * &g - qi(16)) * &z;
    let c0 = qi(4) + qi(2) * &m * &g * (qi(3) - &g) * &z;
    RationalPoly::new(vec![c0, c1, c2, c3, c4])
}

/// `z > z_g(γ)`, decided exactly by squaring the isolated radical.
fn above_z_g(m: u32, g: &Q, z: &Q) -> bool {
    let one = Q::one();
    let (lhs, rad) = if m == 1 {
        (z * g * (g - &one) + g, g * g + (g - &one) * (g - &one))
    } else {
        let b = qi(2) * g * g - g + &one;
        let k = qi(4) * g * (g - &one) + q(8, 3);
        (z * g * &k + &b, &b * &b + qi(2) * g * (g - &one) * &k)
    };
    lhs.is_positive() && &lhs * &lhs > rad
}

/// `z ≤ z_M(γ)`: `w(z)² ≥ 0` on the left branch.
fn at_most_z_m(g: &Q, z: &Q) -> bool {
    let gm2 = g - qi(2);
    let w2 = &gm2 * &gm2 * z * z - qi(2) * (g + qi(2)) * z + Q::one();
    !w2.is_negative() && &gm2 * &gm2 * z <= g + qi(2)
}

/// A rational `r ≤ V̂(γ)`, checked exactly.
fn v_hat_lower(g: &Q) -> Option<Q> {
    let gf = g.to_f64()?;
    let vh = (4.0 - 5.0 * gf + ((9.0 * gf - 8.0) * gf).sqrt()) / (4.0 * (gf - 1.0));
    let r = q_decimal(vh - 1e-9, 12);
    let one = Q::one();
    let lhs = qi(4) * (g - &one) * &r - qi(4) + qi(5) * g;
    let ok = !lhs.is_positive() || &lhs * &lhs <= (qi(9) * g - qi(8)) * g;
    ok.then_some(r)
}

fn inequality_items() -> Vec<CertReport> {
    use Sign::*;
    let one = || qi(1);
    let two = || qi(2);
    // Rational supersets of the intervals with irrational endpoints.
    let gu_hi = || q(159, 100); // both γ_u lie below 159/100
    let gu_lo = || q(77, 50); // both γ_u lie above 77/50
    let gg_lo = || q(5, 2); // γ_g > 5/2
    let mut out = Vec::new();

    // (i): with N = 703/(19683 m) - B, the claim reads z_M < N/A with A > 0;
    // z_M is the smaller root of w(z)², so it suffices that w(N/A)² < 0.
    let a = poly(&[-152, -209, 2187]).scale(&q(1, 729));
    let b = poly(&[2888, -9044]).scale(&q(1, 19683));
    out.push(sign_item(
        "ineq.i A>0",
        &a,
        Interval::closed(gg_lo(), qi(3)),
        Positive,
    ));
    for m in [1i64, 2] {
        let n = &cst(q(703, 19683 * m)) - &b;
        let gm2 = lin(qi(-2), qi(1));
        let gp2 = lin(qi(2), qi(1));
        let qa =
            &(&(&(&gm2 * &gm2) * &(&n * &n)) - &(&(&gp2 * &n) * &a).scale(&two())) + &(&a * &a);
        out.push(sign_item(
            &format!("ineq.i m={m}"),
            &qa,
            Interval::closed(gg_lo(), qi(3)),
            Negative,
        ));
    }

    out.push(sign_item(
        "ineq.ii",
        &poly(&[
            -250, 5050, -51495, 266711, -673057, 1369003, -1769830, 771743,
        ]),
        Interval::open(one(), gu_hi()),
        Negative,
    ));
    out.push(sign_item(
        "ineq.iii",
        &poly(&[22188041, -451420037, 1178808488, -7162470820, 9959809328]),
        Interval::right_open(q(79, 50), two()),
        Negative,
    ));
    out.push(sign_item(
        "ineq.iv",
        &poly(&[61731, -1244367, 3215408, -19360620, 26076848]).scale(&qi(3)),
        Interval::right_open(gu_lo(), two()),
        Negative,
    ));
    out.push(sign_item(
        "ineq.v",
        &poly(&[2592, -37368, 341118, -1143750, 828125]),
        Interval::left_open(one(), two()),
        Negative,
    ));
    out.push(sign_item(
        "ineq.vi",
        &poly(&[18, -90, 123, -141, 53]),
        Interval::left_open(one(), two()),
        Negative,
    ));

    let p7 = poly(&[-600, 7680, -68886, 158584, -121589]);
    out.push(sign_item(
        "ineq.vii",
        &p7,
        Interval::left_open(one(), two()),
        Negative,
    ));
    let z0 = z0_poly();
    let gm2 = lin(qi(-2), qi(1));
    let lhs7 = &(&(&(&gm2 * &gm2) * &(&z0 * &z0)).scale(&qi(-24)) + &(&lin(qi(92), qi(54)) * &z0))
        - &cst(qi(21));
    out.push(identity_item("ineq.vii form", &lhs7.scale(&qi(15625)), &p7));

    out.push(sign_item(
        "ineq.viii",
        &poly(&[450, -5760, 48852, -89063, 49348]),
        Interval::left_open(one(), two()),
        Positive,
    ));
    out.push(sign_item(
        "ineq.ix",
        &poly(&[81, -1119, 3476, -3248, 1048]),
        Interval::open(one(), gu_hi()),
        Positive,
    ));
    // Used on [γ_g, 3] and on [γ_u, 3]; the superset covers both.
    out.push(sign_item(
        "ineq.x",
        &poly(&[1, 19, -100, 100]),
        Interval::closed(gu_lo(), qi(3)),
        Negative,
    ));
    out.push(sign_item(
        "ineq.xi",
        &poly(&[36, -180, 167, 405, -414]),
        Interval::left_open(one(), two()),
        Positive,
    ));

    let p12 = poly(&[64, -352, -292, 4270, -3575, -11948, 15074, 4729]);
    out.push(sign_item(
        "ineq.xii",
        &p12,
        Interval::left_open(one(), two()),
        Positive,
    ));
    let a15 = a_poly_at_fifth();
    out.push(identity_item("ineq.xii form", &a15.scale(&qi(3125)), &p12));

    // (xiii): (20-11γ)z₀ + 5 - 2√3 - 7w(z₀) = (M - 250√3 - 7√P)/125 with
    // M = 55γ²-342γ+1065 and P = 15625 w(z₀)². Given M > 0 and P > 0, the
    // claim follows from K < 500√3 M where K = M² + 187500 - 49P, and that
    // from 750000 M² - K² > 0.
    let m13 = poly(&[55, -342, 1065]);
    let p13 = poly(&[25, -320, 2714, -5816, 6561]);
    let iv13 = || Interval::open(one(), gu_hi());
    out.push(identity_item(
        "ineq.xiii form",
        &w2_of(&z0).scale(&qi(15625)),
        &p13,
    ));
    out.push(identity_item(
        "ineq.xiii M",
        &(&(&lin(qi(20), qi(-11)) * &z0) + &cst(qi(5))).scale(&qi(125)),
        &m13,
    ));
    out.push(sign_item("ineq.xiii M>0", &m13, iv13(), Positive));
    out.push(sign_item("ineq.xiii P>0", &p13, iv13(), Positive));
    let k13 = &(&(&m13 * &m13) + &cst(qi(187500))) - &p13.scale(&qi(49));
    let q13 = &(&m13 * &m13).scale(&qi(750000)) - &(&k13 * &k13);
    out.push(sign_item("ineq.xiii", &q13, iv13(), Positive));

    // (xiv): p(z) at z = 2(γ-1)/11.
    let p14 = p_of_z().compose_in_z(&lin(q(-2, 11), q(2, 11)));
    out.push(sign_item(
        "ineq.xiv",
        &p14,
        Interval::open(one(), gu_hi()),
        Negative,
    ));

    let p15 = poly(&[25, -245, -546, 5016, -15625, 15625]);
    out.push(count_item("ineq.xv on (1,2)", &p15, one(), two(), 1));
    out.push(count_item(
        "ineq.xv bracket",
        &p15,
        q(79, 50),
        q(159, 100),
        1,
    ));
    let p16 = poly(&[450, -4860, 6432, 39111, -207817, 359749, -275503, 110250]);
    out.push(count_item("ineq.xvi on (1,2)", &p16, one(), two(), 1));
    out.push(count_item(
        "ineq.xvi bracket",
        &p16,
        q(77, 50),
        q(31, 20),
        1,
    ));
    for (id, p) in [("ineq.xv at 2", &p15), ("ineq.xvi at 2", &p16)] {
        out.push(CertReport {
            id: id.into(),
            interval: "{2}".into(),
            method: Method::Sturm,
            status: status(!p.eval(&two()).is_zero()),
            detail: format!("value {}", p.eval(&two())),
        });
    }

    out.push(sign_item(
        "ineq.xvii",
        &poly(&[
            -125, 2525, -27310, 154918, -487091, 1084814, -1166290, 217809,
        ]),
        Interval::left_open(one(), gu_hi()),
        Negative,
    ));
    out.push(sign_item(
        "ineq.xviii",
        &poly(&[2744, -68208, 317142, -880880, 760577]),
        Interval::closed(gu_lo(), two()),
        Negative,
    ));
    let p19 = poly(&[100, -1280, 10856, -23264, 10619]);
    out.push(sign_item(
        "ineq.xix",
        &p19,
        Interval::left_open(one(), two()),
        Negative,
    ));
    out.push(identity_item(
        "ineq.xix form",
        &(&w2_of(&z0) - &cst(q(1, 4))).scale(&qi(62500)),
        &p19,
    ));
    out.push(sign_item(
        "ineq.xx",
        &poly(&[25, -320, 2714, -5816, 4061]),
        Interval::open(one(), gu_hi()),
        Positive,
    ));
    out
}

/// Bivariate polynomial in (γ, z) stored as coefficients of z^k, each a
/// polynomial in γ.
struct ZPoly(Vec<RationalPoly>);

impl ZPoly {
    fn compose_in_z(&self, z: &RationalPoly) -> RationalPoly {
        self.0
            .iter()
            .rev()
            .fold(RationalPoly::zero(), |acc, c| &(&acc * z) + c)
    }
}

/// `p(z)` from the lower-barrier argument for `m = 2`.
fn p_of_z() -> ZPoly {
    let gm2 = lin(qi(-2), qi(1));
    let p = |k: u32| gm2.pow(k);
    ZPoly(vec![
        poly(&[1, -2, 1]),
        (&poly(&[1, -1, -10]) * &p(1)).scale(&qi(-1)),
        (&poly(&[11, -25, 4]) * &p(2)).scale(&qi(-2)),
        (&poly(&[3, -5, -4]) * &p(3)).scale(&qi(4)),
        (&poly(&[3, -1]) * &p(5)).scale(&qi(32)),
        (&poly(&[2, -1]) * &p(6)).scale(&qi(32)),
    ])
}

/// `A(γ, 1/5)` from the same argument.
fn a_poly_at_fifth() -> RationalPoly {
    let gm2 = lin(qi(-2), qi(1));
    let p = |k: u32| gm2.pow(k);
    let a = ZPoly(vec![
        poly(&[1, -6, 9]),
        (&poly(&[1, -5, -2]) * &p(1)).scale(&qi(-1)),
        (&poly(&[11, -41, 36]) * &p(2)).scale(&qi(-2)),
        (&poly(&[3, -3, -8]) * &p(3)).scale(&qi(4)),
        (&poly(&[6, -5]) * &p(5)).scale(&qi(16)),
        (&poly(&[1, -1]) * &p(6)).scale(&qi(64)),
    ]);
    a.compose_in_z(&cst(q(1, 5)))
}

fn collapse_items() -> Vec<CertReport> {
    use Sign::*;
    let mut out = Vec::new();
    let iv_q = || Interval::closed(q(77, 50), qi(3));
    // m = 2: the radical exceeds the magnitude of the cubic term.
    let cubic = poly(&[-6, -24, 11, -15]);
    out.push(sign_item("cubic-q m=2 cubic<0", &cubic, iv_q(), Negative));
    let b = poly(&[2, -1, 1]);
    let k = &poly(&[4, -4, 0]) + &cst(q(8, 3));
    let qb = &(&(&cubic * &cubic).scale(&q(1, 225)) - &(&b * &b)) - (&(&poly(&[2, -2, 0]) * &k));
    // Equality at γ = 3, where z_g(3) = 1/10 exactly.
    out.push(sign_item(
        "cubic-q m=2 q<0",
        &qb,
        Interval::right_open(q(77, 50), qi(3)),
        Negative,
    ));
    out.push(CertReport {
        id: "cubic-q m=2 q(3)=0".into(),
        interval: "{3}".into(),
        method: Method::Identity,
        status: status(qb.eval(&qi(3)).is_zero()),
        detail: format!("value {}", qb.eval(&qi(3))),
    });
    let factored =
        &(&(&poly(&[4, -12, 0]) * &poly(&[3, -3, 2])) * &poly(&[3, 36, -55])).scale(&q(1, 225));
    out.push(identity_item("cubic-q m=2 q form", &qb, factored));

    let iv = || Interval::open(qi(1), q(159, 100));
    // Slope signs: rationalized numerators and the non-radical part of the denominators.
    for (m, bb, s, a, den, num) in [
        (
            1,
            poly(&[108, 91]),
            poly(&[289, 15844, 109156]),
            poly(&[1836, -56125, -11594]),
            27000,
            { &poly(&[34, -57]) * &poly(&[108, -233, -125]).scale(&qi(4)) },
        ),
        (
            2,
            poly(&[307, 239]),
            poly(&[289, 11594, 39531]),
            poly(&[5219, -121500, 4749]),
            76750,
            { &poly(&[34, -57]) * &poly(&[921, -2046, -511]) },
        ),
    ] {
        let lhs = &(&(&bb * &bb) * &s) - &(&a * &a);
        out.push(identity_item(
            &format!("slope-sign m={m} form"),
            &lhs,
            &num.scale(&qi(den)),
        ));
        out.push(sign_item(
            &format!("slope-sign m={m} numerator>0"),
            &num,
            iv(),
            Positive,
        ));
        out.push(sign_item(
            &format!("slope-sign m={m} -a>0"),
            &(-&a),
            iv(),
            Positive,
        ));
    }
    out
}

/// `n` interior points of `(lo, hi)` rounded to rationals.
fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
        .collect()
}

fn z_g_f64(m: u32, g: f64) -> f64 {
    crate::phase_plane::z_g(g, m)
}

fn z_m_f64(g: f64) -> f64 {
    crate::phase_plane::z_m(g)
}

/// Largest γ below `γ_u` with `z_g(γ) < 1/10`.
fn sextic_gamma_top(m: u32) -> f64 {
    let gu = crate::phase_plane::gamma_u(m);
    if z_g_f64(m, gu) < 0.1 {
        return gu;
    }
    let (mut a, mut b) = (1.0 + 1e-9, gu);
    for _ in 0..100 {
        let c = 0.5 * (a + b);
        if z_g_f64(m, c) < 0.1 {
            a = c
        } else {
            b = c
        }
    }
    a
}

/// Sextic root count on a 20×20 grid of `γ ∈ (1, γ_u)`, `z ∈ (z_g, 1/10)`.
pub fn sextic_grid(m: u32, n: usize) -> Vec<CertReport> {
    let mut out = Vec::new();
    let top = sextic_gamma_top(m);
    for gf in grid(1.0, top, n) {
        let g = q_decimal(gf, 10);
        let zg = z_g_f64(m, gf);
        for zf in grid(zg, 0.1, n) {
            let z = q_decimal(zf, 12);
            let id = format!("sextic m={m} gamma={g} z={z}");
            let inside =
                above_z_g(m, &g, &z) && z < q(1, 10) && g < q_decimal(top, 10) && g > qi(1);
            let p = sextic_b(m, &g, &z);
            let (st, detail) = match (inside, budan_fourier_count(&p, &qi(-1), &Q::zero())) {
                (false, _) => (Status::Fail, "grid point outside the region".to_string()),
                (true, Ok(bf)) => (
                    status(bf.bound == 1),
                    format!("|V(-1) - V(0)| = {}", bf.bound),
                ),
                (true, Err(e)) => (Status::Fail, e.to_string()),
            };
            out.push(CertReport {
                id,
                interval: "[-1, 0]".into(),
                method: Method::Budan,
                status: st,
                detail,
            });
        }
    }
    out
}

/// Quartic root count on a 20×20 grid of `γ ∈ (1, 2]`, `z ∈ (z_g, z_M]`: one root
/// in `(-1, 0)` by Budan–Fourier, then positivity on `[r, 0]` for a
/// rational `r ≤ V̂`.
pub fn quartic_grid(m: u32, n: usize) -> Vec<CertReport> {
    let mut out = Vec::new();
    for gf in grid(1.0, 2.0, n) {
        let g = q_decimal(gf, 10);
        let (zg, zm) = (z_g_f64(m, gf), z_m_f64(gf));
        for zf in grid(zg, zm, n) {
            let z = q_decimal(zf, 12);
            let id = format!("quartic m={m} gamma={g} z={z}");
            let p = quartic_p(m, &g, &z);
            let inside = above_z_g(m, &g, &z) && at_most_z_m(&g, &z);
            let res = (|| -> Result<(bool, String)> {
                if !inside {
                    return Ok((false, "grid point outside the region".into()));
                }
                let bf = budan_fourier_count(&p, &qi(-1), &Q::zero())?;
                let r = v_hat_lower(&g)
                    .ok_or_else(|| Error::Endpoint("no rational below V-hat".into()))?;
                let c = certify_sign(&p, &Interval::closed(r.clone(), Q::zero()), Sign::Positive)?;
                Ok((
                    bf.bound == 1 && p.eval(&qi(-1)).is_negative() && c.holds,
                    format!(
                        "|V(-1) - V(0)| = {}, positive on [{r}, 0]: {}",
                        bf.bound, c.holds
                    ),
                ))
            })();
            let (st, detail) = match res {
                Ok((ok, d)) => (status(ok), d),
                Err(e) => (Status::Fail, e.to_string()),
            };
            out.push(CertReport {
                id,
                interval: "(V-hat, 0)".into(),
                method: Method::Budan,
                status: st,
                detail,
            });
        }
    }
    out
}

/// Runs every certification item; groups run on separate threads.
pub fn run_suite() -> SuiteReport {
    let jobs: Vec<Box<dyn Fn() -> Vec<CertReport> + Send + Sync>> = vec![
        Box::new(inequality_items),
        Box::new(collapse_items),
        Box::new(|| sextic_grid(1, 20)),
        Box::new(|| sextic_grid(2, 20)),
        Box::new(|| quartic_grid(1, 20)),
        Box::new(|| quartic_grid(2, 20)),
    ];
    let items: Vec<CertReport> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|j| s.spawn(j)).collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("certification worker panicked"))
            .collect()
    });
    let failed = items.iter().filter(|r| r.status == Status::Fail).count();
    SuiteReport {
        passed: items.len() - failed,
        failed,
        items,
    }
}
