//! Taylor expansion `V(C) = Σ v_ℓ C^ℓ` of the analytic trajectory through the
//! star point P0 = (0, 0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_plane::{critical_points, Params, PhasePoint, Triple};
use crate::roots::brent;

pub const DEFAULT_ORDER: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginSeries {
    /// Coefficients with `v[0] = 0` and `v[ℓ] = v_ℓ`.
    pub v: Vec<f64>,
    pub n: usize,
    pub radius_est: f64,
}

/// `s = (γ-1) C_* / (4 V_*)` at the chosen triple point.
pub fn slope_bound_s(p: &Params, triple: Triple) -> Result<f64> {
    let cp = critical_points(p)?;
    let t = cp.triple(triple);
    if !(t.v < 0.0 && t.c > 0.0) {
        return Err(Error::Domain(format!(
            "{triple} = ({}, {}) is not admissible",
            t.v, t.c
        )));
    }
    Ok((p.gamma - 1.0) * t.c / (4.0 * t.v))
}

/// Admissible interval `[1/(2s), 0]` for `v_1`.
pub fn v1_interval(p: &Params, triple: Triple) -> Result<(f64, f64)> {
    let s = slope_bound_s(p, triple)?;
    Ok((1.0 / (2.0 * s), 0.0))
}

pub fn series_coeffs(p: &Params, triple: Triple, v1: f64, n: usize) -> Result<OriginSeries> {
    let (lo, hi) = v1_interval(p, triple)?;
    if !(v1 >= lo && v1 <= hi) {
        return Err(Error::Domain(format!("v1 = {v1} outside [{lo}, {hi}]")));
    }
    Ok(series_coeffs_unchecked(p, v1, n))
}

/// Coefficient recurrence without the admissibility check on `v_1`.
pub fn series_coeffs_unchecked(p: &Params, v1: f64, n: usize) -> OriginSeries {
    let n = n.max(2);
    let mf = p.mf();
    let (g, z) = (p.gamma, p.z);
    let lam = p.lambda; // 1 + mγz
    let (a1, a2) = (p.a1, p.a2);

    let mut v = vec![0.0; n + 1];
    let mut p2 = vec![0.0; n + 1];
    let mut p3 = vec![0.0; n + 1];
    let mut p4 = vec![0.0; n + 1];
    v[1] = v1;
    v[2] = (-2.0 * mf * z - mf * (g - 1.0) * (1.0 - g * z) * v1 * v1 / 2.0) / lam;

    let conv = |a: &[f64], b: &[f64], l: usize| -> f64 { (1..l).map(|i| a[i] * b[l - i]).sum() };
    p2[2] = v1 * v1;
    for l in 3..=n {
        p2[l] = conv(&v, &v, l);
        p3[l] = conv(&v, &p2, l);
        p4[l] = conv(&v, &p3, l);
        let lf = l as f64;
        let b = (1.0 - lf * a1 / 4.0) * p4[l]
            + (3.0 + mf * g * z - lf * (3.0 * a1 - a2) / 3.0) * p3[l]
            + (3.0 + 2.0 * mf * g * z - lf * (lam + 2.0 * a1 - a2) / 2.0) * p2[l]
            + ((lf - 2.0) / 2.0 - 1.0 - mf) * p2[l - 2]
            + ((1.0 + mf * z) * (lf - 2.0) - mf - 1.0 - 2.0 * mf * z) * v[l - 2];
        v[l] = b / (lam * (lf - 1.0));
    }
    let radius_est = radius_estimate(&v);
    OriginSeries { v, n, radius_est }
}

fn radius_estimate(v: &[f64]) -> f64 {
    let n = v.len() - 1;
    let start = n.saturating_sub(9).max(2);
    let k = (start..=n)
        .map(|l| v[l].abs().powf(1.0 / l as f64))
        .fold(0.0, f64::max);
    if k == 0.0 {
        f64::INFINITY
    } else {
        1.0 / k
    }
}

impl OriginSeries {
    /// Handoff radius: largest `|C| <= 0.3 radius_est` at which the last two
    /// terms fall below `1e-12`, with trailing negligible terms trimmed.
    pub fn handoff_radius(&self) -> f64 {
        let mut delta = (0.3 * self.radius_est).min(1.0);
        let n = self.n;
        for _ in 0..200 {
            let tail = (self.v[n] * delta.powi(n as i32)).abs()
                + (self.v[n - 1] * delta.powi(n as i32 - 1)).abs();
            if tail < 1e-12 {
                break;
            }
            delta *= 0.9;
        }
        delta
    }

    /// Drops trailing terms with `|v_ℓ δ^ℓ| < 1e-16`.
    pub fn trimmed(mut self, delta: f64) -> Self {
        while self.n > 2 && (self.v[self.n] * delta.powi(self.n as i32)).abs() < 1e-16 {
            self.v.pop();
            self.n -= 1;
        }
        self
    }

    pub fn eval(&self, c: f64) -> Result<(f64, f64)> {
        if c.abs() >= self.radius_est {
            return Err(Error::Convergence(format!(
                "|C| = {} beyond series radius {}",
                c.abs(),
                self.radius_est
            )));
        }
        Ok(self.eval_unchecked(c))
    }

    pub fn eval_unchecked(&self, c: f64) -> (f64, f64) {
        let mut val = 0.0;
        let mut der = 0.0;
        for l in (1..=self.n).rev() {
            val = val * c + self.v[l];
            der = der * c + l as f64 * self.v[l];
        }
        (val * c, der)
    }
}

pub fn series_eval(series: &OriginSeries, c: f64) -> Result<(f64, f64)> {
    series.eval(c)
}

/// Reciprocal of an incoming slope `dC/dV`, checked against `[1/(2s), 0)`.
pub fn match_v1(p: &Params, triple: Triple, c1: f64) -> Result<f64> {
    let (lo, _) = v1_interval(p, triple)?;
    let v1 = 1.0 / c1;
    if !(v1 < 0.0) || v1 < lo * (1.0 + 1e-9) {
        return Err(Error::Matching(format!("v1 = {v1} outside [{lo}, 0)")));
    }
    Ok(v1)
}

/// Finds `v_1` so that the series passes through `point` (a sample of the
/// incoming trajectory at `C = point.c`).
pub fn match_v1_at(p: &Params, triple: Triple, point: PhasePoint, n: usize) -> Result<f64> {
    let (lo, _) = v1_interval(p, triple)?;
    let hi = -1e-14;
    let f = |v1: f64| series_coeffs_unchecked(p, v1, n).eval_unchecked(point.c).0 - point.v;
    // Large |v1| pushes the radius below |C|, so grow a bracket outward from
    // the secant guess V/C instead of starting from the whole interval.
    let guess = (point.v / point.c).clamp(lo, hi);
    let (mut a, mut b) = ((guess * 0.9).clamp(lo, hi), (guess * 1.1).clamp(lo, hi));
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..60 {
        if fa.is_finite() && fb.is_finite() && fa.signum() != fb.signum() {
            break;
        }
        a = (a * 1.2).clamp(lo, hi).min(a);
        b = (b / 1.2).clamp(lo, hi);
        fa = f(a);
        fb = f(b);
    }
    brent(f, a, b, 1e-16, 200).map_err(|e| {
        Error::Matching(format!(
            "no admissible v1 reproduces ({}, {}): {e}",
            point.v, point.c
        ))
    })
}
