//! Adaptive integration of the phase ODE `dC/dV = F/G`.
//!
//! The independent variable is V while `|F/G| <= 1` and C otherwise, with a
//! 10% hysteresis band. Alongside (V, C) the integrator optionally carries
//! `L = ln|x|` and `Q = ln R`, whose derivatives follow from the x-form of the
//! system and the density equation. Additive constants in L and Q are fixed
//! afterwards by [`Trajectory::attach_x`] and [`Trajectory::attach_r`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_plane::{Params, PhasePoint};
use crate::roots::brent;

/// State `[V, C, ln|x|, ln R]`.
pub type State = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    V,
    C,
}

impl Param {
    fn idx(self) -> usize {
        match self {
            Param::V => 0,
            Param::C => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    SonicUpper,
    SonicLower,
    GZero,
    FZero,
    LineCross(f64),
    VLevel(f64),
    CLevel(f64),
    Exit,
    Stop,
}

type EventFn = Box<dyn Fn(&Params, &State) -> f64 + Send + Sync>;

pub struct EventSpec {
    pub kind: EventKind,
    pub terminal: bool,
    func: EventFn,
}

impl EventSpec {
    pub fn new<F>(kind: EventKind, terminal: bool, f: F) -> Self
    where
        F: Fn(&Params, &State) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind,
            terminal,
            func: Box::new(f),
        }
    }

    /// `C - (1+V)`.
    pub fn sonic_upper(terminal: bool) -> Self {
        Self::new(EventKind::SonicUpper, terminal, |_, y| y[1] - (1.0 + y[0]))
    }

    /// `C + (1+V)`.
    pub fn sonic_lower(terminal: bool) -> Self {
        Self::new(EventKind::SonicLower, terminal, |_, y| y[1] + 1.0 + y[0])
    }

    pub fn g_zero(terminal: bool) -> Self {
        Self::new(EventKind::GZero, terminal, |p, y| p.g(y[0], y[1]))
    }

    pub fn f_zero(terminal: bool) -> Self {
        Self::new(EventKind::FZero, terminal, |p, y| p.f_times_1pv(y[0], y[1]))
    }

    /// Crossing of `C = -κ(1+V)`.
    pub fn line_cross(kappa: f64, terminal: bool) -> Self {
        Self::new(EventKind::LineCross(kappa), terminal, move |_, y| {
            y[1] + kappa * (1.0 + y[0])
        })
    }

    pub fn v_level(v: f64, terminal: bool) -> Self {
        Self::new(EventKind::VLevel(v), terminal, move |_, y| y[0] - v)
    }

    pub fn c_level(c: f64, terminal: bool) -> Self {
        Self::new(EventKind::CLevel(c), terminal, move |_, y| y[1] - c)
    }

    /// Leaves the box `v_lo < V < v_hi`, `c_lo < C < c_hi`.
    pub fn exit_box(v_lo: f64, v_hi: f64, c_lo: f64, c_hi: f64) -> Self {
        Self::new(EventKind::Exit, true, move |_, y| {
            (y[0] - v_lo)
                .min(v_hi - y[0])
                .min(y[1] - c_lo)
                .min(c_hi - y[1])
        })
    }

    pub fn eval(&self, p: &Params, y: &State) -> f64 {
        (self.func)(p, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub state: State,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    /// Step cap, scaled by `max(1, |parameter|)`.
    pub hmax: f64,
    pub hmin: f64,
    pub max_steps: usize,
    pub annotate: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            h0: 1e-4,
            hmax: 0.02,
            hmin: 1e-15,
            max_steps: 200_000,
            annotate: true,
        }
    }
}

impl IntegrateOptions {
    pub fn without_annotations(mut self) -> Self {
        self.annotate = false;
        self
    }

    pub fn scaled_tolerance(mut self, factor: f64) -> Self {
        self.rtol *= factor;
        self.atol *= factor;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<State>,
    pub events: Vec<Event>,
    /// Sign of x along the branch once [`Trajectory::attach_x`] is applied.
    pub x_sign: f64,
    pub x_attached: bool,
    pub r_attached: bool,
}

/// Derivative of the state with respect to the active parameter.
pub fn rhs(p: &Params, param: Param, y: &State) -> State {
    let (v, c) = (y[0], y[1]);
    let d = p.d(v, c);
    let g = p.g(v, c);
    let f = p.f(v, c);
    let k = (p.mf() + 1.0) * v / (p.lambda * (1.0 + v));
    match param {
        Param::V => {
            let dl = -p.lambda * d / g;
            [1.0, f / g, dl, k * dl - 1.0 / (1.0 + v)]
        }
        Param::C => {
            let dv = g / f;
            let dl = -p.lambda * d / f;
            [dv, 1.0, dl, k * dl - dv / (1.0 + v)]
        }
    }
}

/// `d/dL` of `(V, C, Q)` where `L = ln|x|`; finite away from the sonic line.
pub fn rhs_lnx(p: &Params, v: f64, c: f64) -> [f64; 3] {
    let d = p.d(v, c);
    let dv = -p.g(v, c) / (p.lambda * d);
    let dc = -p.f(v, c) / (p.lambda * d);
    let dq = (p.mf() + 1.0) * v / (p.lambda * (1.0 + v)) - dv / (1.0 + v);
    [dv, dc, dq]
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (a, k) in terms {
        for i in 0..4 {
            out[i] += h * a * k[i];
        }
    }
    out
}

/// One Dormand–Prince step. Returns `(y_new, k7 = f(y_new), err_vector)`.
fn dopri_step(p: &Params, param: Param, y: &State, k1: &State, h: f64) -> (State, State, State) {
    let k2 = rhs(p, param, &axpy(y, &[(A21, k1)], h));
    let k3 = rhs(p, param, &axpy(y, &[(A31, k1), (A32, &k2)], h));
    let k4 = rhs(p, param, &axpy(y, &[(A41, k1), (A42, &k2), (A43, &k3)], h));
    let k5 = rhs(
        p,
        param,
        &axpy(y, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
    );
    let k6 = rhs(
        p,
        param,
        &axpy(
            y,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            h,
        ),
    );
    let yn = axpy(
        y,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        h,
    );
    let k7 = rhs(p, param, &yn);
    let mut err = [0.0; 4];
    for i in 0..4 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (yn, k7, err)
}

fn finite(y: &State) -> bool {
    y.iter().all(|x| x.is_finite())
}

fn choose_param(p: &Params, y: &State, current: Option<Param>) -> Param {
    let g = p.g(y[0], y[1]).abs();
    let f = p.f(y[0], y[1]).abs();
    match current {
        Some(Param::V) if f <= 1.1 * g => Param::V,
        Some(Param::C) if g <= 1.1 * f => Param::C,
        _ => {
            if f <= g {
                Param::V
            } else {
                Param::C
            }
        }
    }
}

// Step cap relative to the size of the active parameter, so long runs toward
// |C| or |V| in the thousands stay affordable.
fn hcap(opts: &IntegrateOptions, y: &State, param: Param) -> f64 {
    opts.hmax * y[param.idx()].abs().max(1.0)
}

/// Integrates from `start`, heading in the direction of `heading = (dV, dC)`
/// (only its orientation relative to the local flow matters), until a
/// terminal event fires.
pub fn integrate_phase(
    p: &Params,
    start: State,
    heading: (f64, f64),
    events: &[EventSpec],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let mut y = start;
    if !finite(&y) {
        return Err(Error::Singularity { v: y[0], c: y[1] });
    }
    let mut param = choose_param(p, &y, None);
    let k = rhs(p, param, &y);
    if !finite(&k) {
        return Err(Error::Singularity { v: y[0], c: y[1] });
    }
    let mut sign = if heading.0 * k[0] + heading.1 * k[1] >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let mut h = opts.h0.min(opts.hmax);
    let mut err_prev: f64 = 1e-4;
    let mut traj = Trajectory {
        samples: vec![y],
        x_sign: 0.0,
        ..Default::default()
    };
    let mut gvals: Vec<f64> = events.iter().map(|e| e.eval(p, &y)).collect();

    for _ in 0..opts.max_steps {
        // Reparametrize if the slope has left the hysteresis band.
        let np = choose_param(p, &y, Some(param));
        if np != param {
            let kk = rhs(p, param, &y);
            let dnew = kk[np.idx()];
            sign *= dnew.signum();
            h *= dnew.abs().max(1e-300);
            param = np;
            h = h.min(hcap(opts, &y, param));
        }
        let k1 = rhs(p, param, &y);
        if !finite(&k1) {
            return Err(Error::Singularity { v: y[0], c: y[1] });
        }
        let hs = sign * h;
        let (yn, _k7, err) = dopri_step(p, param, &y, &k1, hs);
        let ncomp = if opts.annotate { 4 } else { 2 };
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for i in 0..ncomp {
            if i == param.idx() {
                continue;
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(yn[i].abs());
            acc += (err[i] / sc).powi(2);
            cnt += 1.0;
        }
        let en = (acc / cnt).sqrt();
        if !en.is_finite() || !finite(&yn) {
            h *= 0.2;
            if h < opts.hmin {
                return Err(Error::Singularity { v: y[0], c: y[1] });
            }
            continue;
        }
        if en > 1.0 {
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            if h < opts.hmin {
                return Err(Error::Singularity { v: y[0], c: y[1] });
            }
            continue;
        }
        // Accepted: look for events in (y, yn].
        let gnew: Vec<f64> = events.iter().map(|e| e.eval(p, &yn)).collect();
        let mut first: Option<(f64, usize, State)> = None;
        for (j, e) in events.iter().enumerate() {
            let (g0, g1) = (gvals[j], gnew[j]);
            let crossed = (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0);
            if !crossed {
                continue;
            }
            let (frac, ys) = refine_event(p, param, &y, &k1, hs, e, g0, g1)?;
            if first.as_ref().is_none_or(|f| frac < f.0) {
                first = Some((frac, j, ys));
            }
        }
        if let Some((_, j, ys)) = first {
            let e = &events[j];
            traj.samples.push(ys);
            traj.events.push(Event {
                kind: e.kind,
                state: ys,
                index: traj.samples.len() - 1,
            });
            if e.terminal {
                return Ok(traj);
            }
            // Non-terminal: continue from the event point so that later
            // crossings are still detected against fresh values.
            y = ys;
            gvals = events.iter().map(|e| e.eval(p, &y)).collect();
            gvals[j] = 0.0;
            continue;
        }
        y = yn;
        gvals = gnew;
        traj.samples.push(y);
        let fac = (0.9 * en.max(1e-10).powf(-0.17) * err_prev.powf(0.04)).clamp(0.2, 5.0);
        err_prev = en.max(1e-4);
        h = (h * fac).min(hcap(opts, &y, param));
    }
    Err(Error::Budget(opts.max_steps))
}

#[allow(clippy::too_many_arguments)]
fn refine_event(
    p: &Params,
    param: Param,
    y: &State,
    k1: &State,
    hs: f64,
    e: &EventSpec,
    g0: f64,
    g1: f64,
) -> Result<(f64, State)> {
    if g1 == 0.0 {
        let (yn, _, _) = dopri_step(p, param, y, k1, hs);
        return Ok((1.0, yn));
    }
    let at = |t: f64| -> State {
        if t == 0.0 {
            *y
        } else {
            dopri_step(p, param, y, k1, t * hs).0
        }
    };
    let tol = 1e-12 / hs.abs().max(1e-300);
    let t = brent(|t| e.eval(p, &at(t)), 0.0, 1.0, tol.min(1e-6), 100).or_else(|_| {
        // Fall back to linear interpolation of the event function.
        Ok::<f64, Error>(g0 / (g0 - g1))
    })?;
    Ok((t, at(t)))
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> State {
        self.samples[0]
    }

    pub fn last(&self) -> State {
        *self.samples.last().expect("empty trajectory")
    }

    pub fn point(&self, i: usize) -> PhasePoint {
        PhasePoint::new(self.samples[i][0], self.samples[i][1])
    }

    pub fn last_event(&self) -> Option<&Event> {
        self.events.last()
    }

    pub fn reversed(mut self) -> Self {
        let n = self.samples.len();
        self.samples.reverse();
        for e in &mut self.events {
            e.index = n - 1 - e.index;
        }
        self.events.reverse();
        self
    }

    /// Appends `other`, dropping its first sample when it repeats our last one.
    pub fn extend_with(&mut self, other: Trajectory) {
        let off = self.samples.len();
        let skip = usize::from(
            !self.samples.is_empty() && other.samples.first().is_some_and(|s| *s == self.last()),
        );
        for mut e in other.events {
            e.index = (e.index + off).saturating_sub(skip);
            self.events.push(e);
        }
        self.samples.extend(other.samples.into_iter().skip(skip));
    }

    /// Shifts the ln|x| column so that sample `index` sits at `x0`.
    pub fn attach_x(&mut self, index: usize, x0: f64) -> Result<()> {
        if x0 == 0.0 || !x0.is_finite() {
            return Err(Error::Annotation(format!("invalid x anchor {x0}")));
        }
        let shift = x0.abs().ln() - self.samples[index][2];
        for s in &mut self.samples {
            s[2] += shift;
        }
        for e in &mut self.events {
            e.state[2] += shift;
        }
        self.x_sign = x0.signum();
        self.x_attached = true;
        let mono = self.samples.windows(2).all(|w| w[1][2] > w[0][2])
            || self.samples.windows(2).all(|w| w[1][2] < w[0][2]);
        if !mono {
            return Err(Error::Annotation("ln|x| is not strictly monotone".into()));
        }
        Ok(())
    }

    /// Shifts the ln R column so that sample `index` has density `r0`.
    pub fn attach_r(&mut self, index: usize, r0: f64) -> Result<()> {
        if !(r0 > 0.0) {
            return Err(Error::Annotation(format!("invalid density anchor {r0}")));
        }
        if self.samples.iter().any(|s| s[0] <= -1.0) {
            return Err(Error::Annotation(
                "V <= -1 on a density-annotated branch".into(),
            ));
        }
        let shift = r0.ln() - self.samples[index][3];
        for s in &mut self.samples {
            s[3] += shift;
        }
        for e in &mut self.events {
            e.state[3] += shift;
        }
        self.r_attached = true;
        Ok(())
    }

    /// x at sample `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x_sign * self.samples[i][2].exp()
    }

    /// Re-integrates from the sample nearest to `level` (in coordinate
    /// `param`) to return the exact state there. Samples must be monotone in
    /// that coordinate.
    pub fn state_at(
        &self,
        p: &Params,
        param: Param,
        level: f64,
        opts: &IntegrateOptions,
    ) -> Result<State> {
        let k = param.idx();
        let n = self.samples.len();
        let inc = self.samples[n - 1][k] > self.samples[0][k];
        let pos = self
            .samples
            .partition_point(|s| if inc { s[k] < level } else { s[k] > level });
        if pos == 0 || pos == n {
            let edge = if pos == 0 {
                self.samples[0]
            } else {
                self.samples[n - 1]
            };
            if (edge[k] - level).abs() <= 1e-14 * (1.0 + level.abs()) {
                return Ok(edge);
            }
            return Err(Error::Domain(format!(
                "level {level} outside trajectory range"
            )));
        }
        let (a, b) = (self.samples[pos - 1], self.samples[pos]);
        let from = if (a[k] - level).abs() <= (b[k] - level).abs() {
            a
        } else {
            b
        };
        if from[k] == level {
            return Ok(from);
        }
        let heading = if from == a {
            (b[0] - a[0], b[1] - a[1])
        } else {
            (a[0] - b[0], a[1] - b[1])
        };
        let ev = match param {
            Param::V => EventSpec::v_level(level, true),
            Param::C => EventSpec::c_level(level, true),
        };
        let mut o = *opts;
        o.hmax = o.hmax.min((a[k] - b[k]).abs().max(1e-12));
        o.h0 = o.hmax * 0.5;
        let t = integrate_phase(p, from, heading, std::slice::from_ref(&ev), &o)?;
        Ok(t.last())
    }
}
