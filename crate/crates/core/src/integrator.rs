//! Adaptive Dormand-Prince 5(4) integration of real systems.
//!
//! Complex coordinates are handled by the callers as interleaved
//! `(re, im)` pairs; the error norm is the max over all scalar components of
//! `|err| / (atol + rtol |y|)`. Output times are hit exactly by shortening
//! the step that would cross them.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A first-order system `dy/dt = f(t, y)` on `R^n`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()>;

    /// Upper bound on the next step, given the current state and slope.
    fn step_cap(&self, _y: &[f64], _dydt: &[f64]) -> Option<f64> {
        None
    }

    /// Conserved-quantity and reality monitors recorded at output times.
    fn observe(&self, _t: f64, _y: &[f64]) -> Result<Observation> {
        Ok(Observation::default())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Observation {
    pub energy: Complex64,
    pub max_im: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub output_every: f64,
    /// Collision cap factor: steps are limited to `eta * d_min / v_max`.
    pub eta: f64,
    pub h_min: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-10,
            output_every: 0.01,
            eta: 0.1,
            h_min: 1e-14,
            h_init: None,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_output_every(mut self, dt: f64) -> Self {
        self.output_every = dt;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub h: f64,
    pub cap: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energy_log: Vec<Complex64>,
    pub max_im_log: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(|s| s.as_slice())
    }

    /// `max_t |E(t) - E(0)| / |E(0)|`.
    pub fn relative_energy_drift(&self) -> f64 {
        let Some(e0) = self.energy_log.first() else {
            return 0.0;
        };
        let scale = e0.norm();
        self.energy_log
            .iter()
            .map(|e| (e - e0).norm() / scale)
            .fold(0.0, f64::max)
    }

    pub fn max_im(&self) -> f64 {
        self.max_im_log.iter().copied().fold(0.0, f64::max)
    }
}

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
// b - b_hat
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }
}

fn combine(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// One trial step. `st.k[0]` must hold `f(t, y)` on entry. On success
/// `st.y_new` holds the 5th-order solution, `st.k[6]` its slope, and the
/// return value is the scaled error norm.
fn try_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    opts: &IntegratorOptions,
    st: &mut Stages,
) -> Result<f64> {
    let Stages { k, tmp, y_new } = st;
    let [k1, k2, k3, k4, k5, k6, k7] = k;

    combine(tmp, y, h, &[(A21, k1)]);
    sys.rhs(t + C2 * h, tmp, k2)?;
    combine(tmp, y, h, &[(A31, k1), (A32, k2)]);
    sys.rhs(t + C3 * h, tmp, k3)?;
    combine(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    sys.rhs(t + C4 * h, tmp, k4)?;
    combine(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    sys.rhs(t + C5 * h, tmp, k5)?;
    combine(
        tmp,
        y,
        h,
        &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
    );
    sys.rhs(t + h, tmp, k6)?;
    combine(
        y_new,
        y,
        h,
        &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)],
    );
    sys.rhs(t + h, y_new, k7)?;

    let mut err: f64 = 0.0;
    for i in 0..y.len() {
        let e = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        err = err.max(e.abs() / scale);
    }
    if !err.is_finite() {
        err = f64::INFINITY;
    }
    Ok(err)
}

fn initial_step(y: &[f64], f0: &[f64], opts: &IntegratorOptions, span: f64) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (yi, fi) in y.iter().zip(f0) {
        let sc = opts.atol + opts.rtol * yi.abs();
        d0 = d0.max(yi.abs() / sc);
        d1 = d1.max(fi.abs() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(span).max(opts.h_min)
}

fn record<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], traj: &mut Trajectory) -> Result<()> {
    let obs = sys.observe(t, y)?;
    traj.times.push(t);
    traj.states.push(y.to_vec());
    traj.energy_log.push(obs.energy);
    traj.max_im_log.push(obs.max_im);
    Ok(())
}

fn is_collision(e: &Error) -> bool {
    matches!(
        e,
        Error::Collision { .. } | Error::SingularArgument { .. } | Error::CoincidentPoints { .. }
    )
}

/// Integrates `sys` from `(t0, y0)` to `t_end`, recording the state at
/// `t0` and at every multiple of `output_every` up to and including `t_end`.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidArgument("rtol and atol must be positive".into()));
    }
    if !(opts.output_every > 0.0) {
        return Err(Error::InvalidArgument("output_every must be positive".into()));
    }
    if !(t_end >= t0) {
        return Err(Error::InvalidArgument("t_end must not precede t0".into()));
    }
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::InvalidArgument(format!(
            "state has length {}, system expects {n}",
            y0.len()
        )));
    }

    let mut traj = Trajectory::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut st = Stages::new(n);
    sys.rhs(t, &y, &mut st.k[0])?;
    traj.rhs_evals += 1;
    record(sys, t, &y, &mut traj)?;

    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&y, &st.k[0], opts, t_end - t0));
    let mut out_index: u64 = 1;
    let mut steps = 0usize;
    let tiny = 1e-12 * (t_end - t0).abs().max(1.0);

    while t_end - t > tiny {
        let next_out = (t0 + out_index as f64 * opts.output_every).min(t_end);
        let cap = sys.step_cap(&y, &st.k[0]).map(|c| c.max(0.0));
        let mut h_try = h;
        if let Some(c) = cap {
            h_try = h_try.min(c);
        }
        let landing = h_try >= next_out - t;
        if landing {
            h_try = next_out - t;
        }
        if h_try < opts.h_min && !landing {
            return Err(Error::StepUnderflow { t, h: h_try });
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepUnderflow { t, h: h_try });
        }

        let attempt = try_step(sys, t, &y, h_try, opts, &mut st);
        traj.rhs_evals += 6;
        let err = match attempt {
            Ok(e) => e,
            Err(e) if is_collision(&e) => {
                // a trial stage overshot into a collision; retry smaller
                if h_try <= opts.h_min {
                    return Err(e);
                }
                traj.rejected += 1;
                h = 0.25 * h_try;
                continue;
            }
            Err(e) => return Err(e),
        };

        if err <= 1.0 {
            traj.steps.push(StepRecord { t, h: h_try, cap });
            t = if landing { next_out } else { t + h_try };
            std::mem::swap(&mut y, &mut st.y_new);
            st.k.swap(0, 6);
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // landing steps are artificially short; do not let them shrink h
            h = if landing { h.max(h_try * factor) } else { h_try * factor };
            if landing {
                record(sys, t, &y, &mut traj)?;
                out_index += 1;
            }
        } else {
            traj.rejected += 1;
            h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < opts.h_min {
                return Err(Error::StepUnderflow { t, h });
            }
        }
    }
    Ok(traj)
}

/// Wraps a system so that its state is a displacement from a fixed base
/// point. Short-time propagation then keeps full relative precision in the
/// displacement.
pub struct Displaced<'a, S: ?Sized> {
    pub inner: &'a S,
    pub base: Vec<f64>,
}

impl<S: OdeSystem + ?Sized> OdeSystem for Displaced<'_, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let full: Vec<f64> = self.base.iter().zip(y).map(|(b, d)| b + d).collect();
        self.inner.rhs(t, &full, dydt)
    }

    fn step_cap(&self, y: &[f64], dydt: &[f64]) -> Option<f64> {
        let full: Vec<f64> = self.base.iter().zip(y).map(|(b, d)| b + d).collect();
        self.inner.step_cap(&full, dydt)
    }
}

/// Time-reversed copy of a system, for backward propagation.
pub struct Reversed<'a, S: ?Sized>(pub &'a S);

impl<S: OdeSystem + ?Sized> OdeSystem for Reversed<'_, S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        self.0.rhs(-t, y, dydt)?;
        for d in dydt.iter_mut() {
            *d = -*d;
        }
        Ok(())
    }

    fn step_cap(&self, y: &[f64], dydt: &[f64]) -> Option<f64> {
        self.0.step_cap(y, dydt)
    }
}
