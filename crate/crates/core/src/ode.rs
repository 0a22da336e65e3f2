//! Dormand–Prince 5(4) integration of quaternion-vector states with dense output,
//! norm-escape detection and path-integral accumulators.
//!
//! The state is a flat vector of `4·dimension` reals followed by the accumulator
//! slots. Accumulators are integrated as extra components of the same system, so
//! their quadrature error is controlled by the same step-size selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quat::Quaternion;

pub const DEFAULT_RTOL: f64 = 1e-9;
pub const DEFAULT_ATOL: f64 = 1e-12;
pub const DEFAULT_ESCAPE_NORM: f64 = 1e8;
/// Norm at which the escape time is located once escape has been flagged.
pub const ESCAPE_REFINE_NORM: f64 = 1e6;
pub const DEFAULT_MAX_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("invalid problem: {0}")]
    InvalidInput(String),
    #[error("right-hand side failed at t = {t}: {message}")]
    Rhs { t: f64, message: String },
    #[error("t = {t} outside the covered interval [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("no accumulator labelled `{0}`")]
    UnknownAccumulator(String),
}

impl OdeError {
    pub fn rhs(t: f64, err: impl std::fmt::Display) -> Self {
        OdeError::Rhs { t, message: err.to_string() }
    }
}

pub type RhsFn<'a> = Box<dyn Fn(f64, &[f64], &mut [f64]) -> Result<(), OdeError> + 'a>;

/// A labelled integral `∫ integrand(t, state) dt` advanced alongside the state.
pub struct Accumulator<'a> {
    pub label: String,
    pub width: usize,
    pub integrand: RhsFn<'a>,
}

impl<'a> Accumulator<'a> {
    pub fn new(
        label: impl Into<String>,
        width: usize,
        integrand: impl Fn(f64, &[f64], &mut [f64]) -> Result<(), OdeError> + 'a,
    ) -> Self {
        Self { label: label.into(), width, integrand: Box::new(integrand) }
    }
}

pub struct OdeProblem<'a> {
    /// Number of quaternion slots in the state.
    pub dimension: usize,
    pub rhs: RhsFn<'a>,
    pub t0: f64,
    pub y0: Vec<f64>,
    /// Number of leading reals entering the escape norm (defaults to the whole state).
    pub escape_components: usize,
    pub escape_norm: f64,
    /// Absolute tolerance for the state slots; accumulators keep the solver's `atol`.
    pub state_atol: Option<f64>,
}

impl<'a> OdeProblem<'a> {
    pub fn new(
        dimension: usize,
        t0: f64,
        y0: Vec<f64>,
        rhs: impl Fn(f64, &[f64], &mut [f64]) -> Result<(), OdeError> + 'a,
    ) -> Self {
        Self {
            dimension,
            rhs: Box::new(rhs),
            t0,
            y0,
            escape_components: 4 * dimension,
            escape_norm: DEFAULT_ESCAPE_NORM,
            state_atol: None,
        }
    }

    pub fn with_escape_norm(mut self, escape_norm: f64) -> Self {
        self.escape_norm = escape_norm;
        self
    }

    pub fn with_state_atol(mut self, atol: f64) -> Self {
        self.state_atol = Some(atol);
        self
    }

    /// Restricts the escape norm to the first `slots` quaternion slots.
    pub fn with_escape_slots(mut self, slots: usize) -> Self {
        self.escape_components = 4 * slots;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: DEFAULT_RTOL, atol: DEFAULT_ATOL }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    ReachedEnd,
    /// Escape flagged; `t_escape` is where the state norm first reached the refine threshold.
    Escaped { t_escape: f64 },
    /// Step size underflow (or step budget exhausted) at `t`.
    StiffnessFailure { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct AccSlot {
    label: String,
    offset: usize,
    width: usize,
}

/// Accepted steps plus a 4th-order continuous extension per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dimension: usize,
    n: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    /// Five coefficient vectors per step.
    dense: Vec<f64>,
    status: Status,
    accumulators: Vec<AccSlot>,
    escape_components: usize,
}

// Dormand–Prince 5(4) tableau.
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer–Nørsett–Wanner, DOPRI5 `contd5`).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct System<'p, 'a> {
    problem: &'p OdeProblem<'a>,
    accumulators: &'p [Accumulator<'a>],
    core: usize,
    /// `(start, end, atol)` of each error-control block.
    blocks: Vec<(usize, usize, f64)>,
}

impl System<'_, '_> {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), OdeError> {
        let (core_y, _) = y.split_at(self.core);
        let (core_dy, acc_dy) = dy.split_at_mut(self.core);
        (self.problem.rhs)(t, core_y, core_dy)?;
        let mut offset = 0;
        for acc in self.accumulators {
            (acc.integrand)(t, core_y, &mut acc_dy[offset..offset + acc.width])?;
            offset += acc.width;
        }
        Ok(())
    }

    /// Max over blocks of `‖e_b‖ / (atol + rtol·max(‖y0_b‖, ‖y1_b‖))`.
    fn error_norm(&self, err: &[f64], y0: &[f64], y1: &[f64], tol: &Tolerances) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.blocks
            .iter()
            .map(|&(a, b, atol)| {
                let sc = atol + tol.rtol * norm(&y0[a..b]).max(norm(&y1[a..b]));
                norm(&err[a..b]) / sc
            })
            .fold(0.0, f64::max)
    }
}

fn axpy_into(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..out.len() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

/// Integrates `problem` from `t0` to `t_end`.
pub fn solve(
    problem: &OdeProblem<'_>,
    t_end: f64,
    tol: Tolerances,
    accumulators: &[Accumulator<'_>],
) -> Result<Trajectory, OdeError> {
    solve_with_limit(problem, t_end, tol, accumulators, DEFAULT_MAX_STEPS)
}

pub fn solve_with_limit(
    problem: &OdeProblem<'_>,
    t_end: f64,
    tol: Tolerances,
    accumulators: &[Accumulator<'_>],
    max_steps: usize,
) -> Result<Trajectory, OdeError> {
    let t0 = problem.t0;
    if !(t_end > t0) {
        return Err(OdeError::InvalidInput(format!("t_end = {t_end} must exceed t0 = {t0}")));
    }
    if !(tol.rtol > 0.0 && tol.atol > 0.0) {
        return Err(OdeError::InvalidInput("rtol and atol must be positive".into()));
    }
    let core = 4 * problem.dimension;
    if problem.y0.len() != core {
        return Err(OdeError::InvalidInput(format!(
            "initial state has {} reals, expected {core}",
            problem.y0.len()
        )));
    }
    if problem.escape_components > core {
        return Err(OdeError::InvalidInput("escape components exceed the state".into()));
    }

    let state_atol = problem.state_atol.unwrap_or(tol.atol);
    if !(state_atol > 0.0) {
        return Err(OdeError::InvalidInput("state atol must be positive".into()));
    }
    let mut blocks: Vec<(usize, usize, f64)> = (0..problem.dimension).map(|s| (4 * s, 4 * s + 4, state_atol)).collect();
    let mut acc_slots = Vec::new();
    let mut offset = core;
    for acc in accumulators {
        if acc_slots.iter().any(|s: &AccSlot| s.label == acc.label) {
            return Err(OdeError::InvalidInput(format!("duplicate accumulator `{}`", acc.label)));
        }
        blocks.push((offset, offset + acc.width, tol.atol));
        acc_slots.push(AccSlot { label: acc.label.clone(), offset, width: acc.width });
        offset += acc.width;
    }
    let n = offset;
    let sys = System { problem, accumulators, core, blocks };

    let mut y = problem.y0.clone();
    y.resize(n, 0.0);
    let mut traj = Trajectory {
        dimension: problem.dimension,
        n,
        times: vec![t0],
        states: y.clone(),
        dense: Vec::new(),
        status: Status::ReachedEnd,
        accumulators: acc_slots,
        escape_components: problem.escape_components,
    };

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];

    let mut t = t0;
    sys.eval(t, &y, &mut k1)?;
    let mut h = initial_step(&sys, t, &y, &k1, t_end - t0, &tol)?;
    let escape_of = |v: &[f64]| v[..problem.escape_components].iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut steps = 0usize;
    let mut rejected_last = false;

    while t < t_end {
        if steps >= max_steps {
            traj.status = Status::StiffnessFailure { t };
            return Ok(traj);
        }
        if h < 1e-14 * t.abs().max(1.0) {
            traj.status = Status::StiffnessFailure { t };
            return Ok(traj);
        }
        let last = t + h >= t_end;
        let h_step = if last { t_end - t } else { h };

        let stages = (|| -> Result<bool, OdeError> {
            axpy_into(&mut ytmp, &y, h_step, &[(A21, &k1)]);
            sys.eval(t + C2 * h_step, &ytmp, &mut k2)?;
            axpy_into(&mut ytmp, &y, h_step, &[(A31, &k1), (A32, &k2)]);
            sys.eval(t + C3 * h_step, &ytmp, &mut k3)?;
            axpy_into(&mut ytmp, &y, h_step, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            sys.eval(t + C4 * h_step, &ytmp, &mut k4)?;
            axpy_into(&mut ytmp, &y, h_step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            sys.eval(t + C5 * h_step, &ytmp, &mut k5)?;
            axpy_into(&mut ytmp, &y, h_step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            sys.eval(t + h_step, &ytmp, &mut k6)?;
            axpy_into(&mut ynew, &y, h_step, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            sys.eval(t + h_step, &ynew, &mut k7)?;
            Ok(ynew.iter().chain(k7.iter()).all(|v| v.is_finite()))
        })();
        let finite = match stages {
            Ok(f) => f,
            // A failing stage evaluation inside the step (e.g. a singular inverse) shrinks the step.
            Err(OdeError::Rhs { .. }) if h_step > 1e-14 * t.abs().max(1.0) * 4.0 => false,
            Err(e) => return Err(e),
        };
        steps += 1;
        if !finite {
            h = 0.25 * h_step;
            rejected_last = true;
            continue;
        }
        for i in 0..n {
            err[i] = h_step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = sys.error_norm(&err, &y, &ynew, &tol);
        if en <= 1.0 {
            // Dense output coefficients.
            let base = traj.dense.len();
            traj.dense.resize(base + 5 * n, 0.0);
            let d = &mut traj.dense[base..];
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = h_step * k1[i] - ydiff;
                d[i] = y[i];
                d[n + i] = ydiff;
                d[2 * n + i] = bspl;
                d[3 * n + i] = ydiff - h_step * k7[i] - bspl;
                d[4 * n + i] =
                    h_step * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            t = if last { t_end } else { t + h_step };
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            traj.times.push(t);
            traj.states.extend_from_slice(&y);

            if escape_of(&y) > problem.escape_norm {
                let threshold = ESCAPE_REFINE_NORM.min(problem.escape_norm);
                traj.status = Status::Escaped { t_escape: traj.first_crossing(threshold) };
                return Ok(traj);
            }
            let mut fac = 0.9 * en.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h = h_step * fac;
            if last {
                h = h.max(h_step);
            }
            rejected_last = false;
        } else {
            let fac = (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
            h = h_step * fac;
            rejected_last = true;
        }
    }
    Ok(traj)
}

fn initial_step(sys: &System<'_, '_>, t: f64, y: &[f64], f0: &[f64], span: f64, tol: &Tolerances) -> Result<f64, OdeError> {
    let zeros = vec![0.0; y.len()];
    let d0 = sys.error_norm(y, y, &zeros, tol);
    let d1 = sys.error_norm(f0, y, &zeros, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    if sys.eval(t + h0, &y1, &mut f1).is_err() {
        return Ok(h0 * 1e-3);
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = sys.error_norm(&diff, y, &zeros, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

impl Trajectory {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_last(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn state_at_step(&self, k: usize) -> &[f64] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state_at_step(self.times.len() - 1)
    }

    pub fn escape_norm_of(&self, state: &[f64]) -> f64 {
        state[..self.escape_components].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn locate(&self, t: f64) -> Result<Option<(usize, f64)>, OdeError> {
        let (lo, hi) = (self.t_start(), self.t_last());
        if !(t >= lo && t <= hi) {
            return Err(OdeError::OutOfRange { t, lo, hi });
        }
        let p = self.times.partition_point(|&x| x < t);
        if p < self.times.len() && self.times[p] == t {
            return Ok(None);
        }
        let k = p - 1;
        let theta = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok(Some((k, theta)))
    }

    /// Full augmented state at `t` (state slots then accumulators).
    pub fn query(&self, t: f64) -> Result<Vec<f64>, OdeError> {
        let mut out = vec![0.0; self.n];
        self.query_into(t, &mut out)?;
        Ok(out)
    }

    pub fn query_into(&self, t: f64, out: &mut [f64]) -> Result<(), OdeError> {
        match self.locate(t)? {
            None => {
                let k = self.times.partition_point(|&x| x < t);
                out.copy_from_slice(self.state_at_step(k));
            }
            Some((k, th)) => {
                let n = self.n;
                let d = &self.dense[5 * n * k..5 * n * (k + 1)];
                let th1 = 1.0 - th;
                for i in 0..n {
                    out[i] = d[i] + th * (d[n + i] + th1 * (d[2 * n + i] + th * (d[3 * n + i] + th1 * d[4 * n + i])));
                }
            }
        }
        Ok(())
    }

    /// Time derivative of the dense interpolant.
    pub fn derivative(&self, t: f64) -> Result<Vec<f64>, OdeError> {
        let (k, th) = match self.locate(t)? {
            Some(v) => v,
            None => {
                let p = self.times.partition_point(|&x| x < t);
                if p == 0 { (0, 0.0) } else { (p - 1, 1.0) }
            }
        };
        if self.dense.is_empty() {
            return Ok(vec![0.0; self.n]);
        }
        let n = self.n;
        let h = self.times[k + 1] - self.times[k];
        let d = &self.dense[5 * n * k..5 * n * (k + 1)];
        let th1 = 1.0 - th;
        let c2 = 1.0;
        let c3 = 1.0 - 2.0 * th;
        let c4 = 2.0 * th * th1 - th * th;
        let c5 = 2.0 * th * th1 * th1 - 2.0 * th * th * th1;
        Ok((0..n)
            .map(|i| (c2 * d[n + i] + c3 * d[2 * n + i] + c4 * d[3 * n + i] + c5 * d[4 * n + i]) / h)
            .collect())
    }

    pub fn slot(&self, t: f64, slot: usize) -> Result<Quaternion, OdeError> {
        let s = self.query(t)?;
        Ok(Quaternion::from_slice(&s[4 * slot..4 * slot + 4]))
    }

    pub fn accumulated(&self, label: &str, t: f64) -> Result<Vec<f64>, OdeError> {
        let slot = self
            .accumulators
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| OdeError::UnknownAccumulator(label.to_string()))?;
        let s = self.query(t)?;
        Ok(s[slot.offset..slot.offset + slot.width].to_vec())
    }

    pub fn accumulator_offset(&self, label: &str) -> Option<(usize, usize)> {
        self.accumulators.iter().find(|s| s.label == label).map(|s| (s.offset, s.width))
    }

    /// First time the escape norm reaches `threshold`, by bisection on the dense output.
    pub fn first_time_norm_reaches(&self, threshold: f64) -> Option<f64> {
        let k = (0..self.times.len()).find(|&k| self.escape_norm_of(self.state_at_step(k)) >= threshold)?;
        if k == 0 {
            return Some(self.times[0]);
        }
        let (mut lo, mut hi) = (self.times[k - 1], self.times[k]);
        let mut buf = vec![0.0; self.n];
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            self.query_into(mid, &mut buf).expect("mid lies inside the covered interval");
            if self.escape_norm_of(&buf) >= threshold {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    fn first_crossing(&self, threshold: f64) -> f64 {
        self.first_time_norm_reaches(threshold).unwrap_or_else(|| self.t_last())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(rhs: impl Fn(f64, f64) -> f64 + 'static, y0: f64) -> OdeProblem<'static> {
        OdeProblem::new(1, 0.0, vec![y0, 0.0, 0.0, 0.0], move |t, y, dy| {
            dy.fill(0.0);
            dy[0] = rhs(t, y[0]);
            Ok(())
        })
    }

    #[test]
    fn riccati_pole_escapes_near_one() {
        let p = scalar(|_, q| -q * q, -1.0);
        let tr = solve(&p, 3.0, Tolerances::default(), &[]).unwrap();
        match tr.status() {
            Status::Escaped { t_escape } => assert!((t_escape - 1.0).abs() < 1e-2, "{t_escape}"),
            s => panic!("{s:?}"),
        }
        assert!(tr.escape_norm_of(tr.last_state()) > DEFAULT_ESCAPE_NORM);
    }

    #[test]
    fn constant_solution() {
        let p = OdeProblem::new(1, 0.0, Quaternion::J.to_array().to_vec(), |_, _, dy| {
            dy.fill(0.0);
            Ok(())
        });
        let tr = solve(&p, 5.0, Tolerances::default(), &[]).unwrap();
        assert_eq!(tr.status(), Status::ReachedEnd);
        assert_eq!(tr.slot(2.5, 0).unwrap(), Quaternion::J);
        assert_eq!(tr.slot(5.0, 0).unwrap(), Quaternion::J);
    }

    #[test]
    fn exponential_decay_and_dense_output() {
        let p = scalar(|_, q| -q, 1.0);
        let tr = solve(&p, 1.0, Tolerances::default(), &[]).unwrap();
        assert_eq!(tr.status(), Status::ReachedEnd);
        assert!((tr.last_state()[0] - (-1f64).exp()).abs() < 1e-8);
        assert_eq!(tr.query(1.0).unwrap(), tr.last_state().to_vec());
        assert!((tr.query(0.5).unwrap()[0] - (-0.5f64).exp()).abs() < 1e-7);
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let d = tr.derivative(t).unwrap()[0];
            assert!((d + (-t).exp()).abs() < 1e-6, "t={t} d={d}");
        }
        assert!(matches!(tr.query(1.5), Err(OdeError::OutOfRange { .. })));
    }

    #[test]
    fn state_independent_accumulator_matches_quadrature() {
        let p = scalar(|_, q| -q, 1.0);
        let acc = Accumulator::new("cos", 1, |t, _, out| {
            out[0] = (3.0 * t).cos();
            Ok(())
        });
        let tol = Tolerances::default();
        let tr = solve(&p, 4.0, tol, &[acc]).unwrap();
        let exact = crate::quadrature::integrate(|t| (3.0 * t).cos(), 0.0, 2.7, 1e-13).unwrap().value;
        let got = tr.accumulated("cos", 2.7).unwrap()[0];
        assert!((got - exact).abs() < 10.0 * (tol.atol + tol.rtol), "{got} vs {exact}");
        assert!(matches!(tr.accumulated("nope", 1.0), Err(OdeError::UnknownAccumulator(_))));
    }

    #[test]
    fn invalid_inputs() {
        let p = scalar(|_, q| q, 1.0);
        assert!(matches!(solve(&p, 0.0, Tolerances::default(), &[]), Err(OdeError::InvalidInput(_))));
        assert!(matches!(solve(&p, 1.0, Tolerances::new(0.0, 1e-12), &[]), Err(OdeError::InvalidInput(_))));
    }

    #[test]
    fn step_budget_reports_failure_status() {
        let p = scalar(|t, _| (50.0 * t).cos(), 0.0);
        let tr = solve_with_limit(&p, 100.0, Tolerances::default(), &[], 5).unwrap();
        assert!(matches!(tr.status(), Status::StiffnessFailure { .. }));
    }

    #[test]
    fn escape_time_approaches_pole_as_threshold_grows() {
        let lambda = 2.0;
        let mut prev = f64::INFINITY;
        for norm in [1e4, 1e6, 1e8] {
            let p = scalar(|_, q| -q * q, -1.0 / lambda).with_escape_norm(norm);
            let tr = solve(&p, 5.0, Tolerances::default(), &[]).unwrap();
            let Status::Escaped { t_escape } = tr.status() else { panic!() };
            let gap = (t_escape - lambda).abs();
            assert!(gap <= prev + 1e-12 && gap < 1e-2, "norm {norm}: {t_escape}");
            prev = gap;
        }
    }
}
