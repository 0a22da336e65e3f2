//! Time-dependent quaternion-valued coefficients `a(t), b(t), c(t), d(t)`.
//!
//! Every quaternion component is an independent real function. Closed-form kinds are
//! valid on the whole half-line; sampled tables only on their grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, QuadError};
use crate::quat::Quaternion;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoeffError {
    #[error("t = {t} outside the coefficient domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("component {component}: {source}")]
    ToleranceNotMet {
        component: usize,
        #[source]
        source: QuadError,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigFn {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Linear,
    #[default]
    Cubic,
}

/// A single real-valued component function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RealFn {
    Const(f64),
    /// Ascending coefficients.
    Poly(Vec<f64>),
    /// `p(t)·e^{rate·t}`.
    Exp { rate: f64, poly: Vec<f64> },
    /// `p(t)·cos(ωt+φ)` or `p(t)·sin(ωt+φ)`.
    Trig {
        omega: f64,
        #[serde(default)]
        phase: f64,
        func: TrigFn,
        poly: Vec<f64>,
    },
    /// `height·(1 − u²)²` with `u = (t − center)/half_width`, zero for `|u| >= 1`.
    Bump { center: f64, half_width: f64, height: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpSpec {
    pub rate: f64,
    pub poly: [Vec<f64>; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigSpec {
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
    pub func: TrigFn,
    pub poly: [Vec<f64>; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: f64,
    pub half_width: f64,
    pub value: Quaternion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub times: Vec<f64>,
    pub values: Vec<Quaternion>,
    #[serde(default)]
    pub interp: Interp,
    /// Natural-spline second derivatives, filled by [`Table::prepare`].
    #[serde(skip)]
    m2: Vec<[f64; 4]>,
}

/// Quaternion-valued coefficient function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffFn {
    Const(Quaternion),
    Poly([Vec<f64>; 4]),
    Exp(ExpSpec),
    Trig(TrigSpec),
    Bump(BumpSpec),
    Components(Box<[RealFn; 4]>),
    Table(Table),
}

impl Default for CoeffFn {
    fn default() -> Self {
        CoeffFn::zero()
    }
}

#[inline]
fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

fn bump_profile(center: f64, half_width: f64, t: f64) -> f64 {
    let u = (t - center) / half_width;
    if u.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - u * u;
        s * s
    }
}

/// `∫_T^∞ |p(t)| e^{rate·t} dt` upper bound for `rate < 0`, `T >= 0`.
fn exp_poly_tail_bound(poly: &[f64], rate: f64, from: f64) -> Option<f64> {
    if poly.iter().all(|&c| c == 0.0) {
        return Some(0.0);
    }
    if rate >= 0.0 || from < 0.0 {
        return None;
    }
    let s = -rate;
    let mut bound = 0.0;
    for (k, &ck) in poly.iter().enumerate() {
        // ∫_T^∞ t^k e^{−st} dt = e^{−sT} Σ_j k!/(k−j)! T^{k−j} / s^{j+1}
        let mut falling = 1.0;
        let mut sum = 0.0;
        for j in 0..=k {
            sum += falling * from.powi((k - j) as i32) / s.powi(j as i32 + 1);
            falling *= (k - j) as f64;
        }
        bound += ck.abs() * sum;
    }
    Some(bound * (-s * from).exp())
}

/// What is known about `∫_{T}^{∞}` beyond a truncation point `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailBound {
    /// Absolute value of the neglected tail is at most this.
    Bounded(f64),
    NonAbsolutelyConvergent,
    Unknown,
}

impl TailBound {
    fn combine(self, other: Self) -> Self {
        use TailBound::*;
        match (self, other) {
            (NonAbsolutelyConvergent, _) | (_, NonAbsolutelyConvergent) => NonAbsolutelyConvergent,
            (Unknown, _) | (_, Unknown) => Unknown,
            (Bounded(a), Bounded(b)) => Bounded(a.max(b)),
        }
    }
}

impl RealFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RealFn::Const(c) => *c,
            RealFn::Poly(p) => horner(p, t),
            RealFn::Exp { rate, poly } => horner(poly, t) * (rate * t).exp(),
            RealFn::Trig { omega, phase, func, poly } => {
                let arg = omega * t + phase;
                let w = match func {
                    TrigFn::Cos => arg.cos(),
                    TrigFn::Sin => arg.sin(),
                };
                horner(poly, t) * w
            }
            RealFn::Bump { center, half_width, height } => height * bump_profile(*center, *half_width, t),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            RealFn::Const(c) => *c == 0.0,
            RealFn::Poly(p) | RealFn::Exp { poly: p, .. } | RealFn::Trig { poly: p, .. } => p.iter().all(|&c| c == 0.0),
            RealFn::Bump { height, .. } => *height == 0.0,
        }
    }

    fn tail_bound(&self, from: f64) -> TailBound {
        if self.is_zero() {
            return TailBound::Bounded(0.0);
        }
        match self {
            RealFn::Const(_) | RealFn::Poly(_) | RealFn::Trig { .. } => TailBound::NonAbsolutelyConvergent,
            RealFn::Exp { rate, poly } => match exp_poly_tail_bound(poly, *rate, from) {
                Some(b) => TailBound::Bounded(b),
                None if *rate >= 0.0 => TailBound::NonAbsolutelyConvergent,
                None => TailBound::Unknown,
            },
            RealFn::Bump { center, half_width, height } => {
                TailBound::Bounded(height.abs() * (center + half_width.abs() - from).max(0.0))
            }
        }
    }

    fn negated(&self) -> Self {
        let neg = |p: &Vec<f64>| p.iter().map(|c| -c).collect::<Vec<_>>();
        match self {
            RealFn::Const(c) => RealFn::Const(-c),
            RealFn::Poly(p) => RealFn::Poly(neg(p)),
            RealFn::Exp { rate, poly } => RealFn::Exp { rate: *rate, poly: neg(poly) },
            RealFn::Trig { omega, phase, func, poly } => RealFn::Trig {
                omega: *omega,
                phase: *phase,
                func: *func,
                poly: neg(poly),
            },
            RealFn::Bump { center, half_width, height } => RealFn::Bump {
                center: *center,
                half_width: *half_width,
                height: -height,
            },
        }
    }
}

fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations.
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let lower = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        if i > 1 {
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
    }
    for i in (1..n - 1).rev() {
        m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
    }
    m
}

impl Table {
    pub fn new(times: Vec<f64>, values: Vec<Quaternion>, interp: Interp) -> Result<Self, CoeffError> {
        let mut t = Table { times, values, interp, m2: Vec::new() };
        t.prepare("table")?;
        Ok(t)
    }

    /// Validates the grid and precomputes spline data.
    pub fn prepare(&mut self, path: &str) -> Result<(), CoeffError> {
        let schema = |message: &str| CoeffError::Schema { path: path.to_string(), message: message.to_string() };
        if self.times.len() < 2 {
            return Err(schema("table needs at least two samples"));
        }
        if self.times.len() != self.values.len() {
            return Err(schema("times and values differ in length"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(schema("times must be strictly increasing"));
        }
        let mut m2 = vec![[0.0; 4]; self.times.len()];
        for comp in 0..4 {
            let y: Vec<f64> = self.values.iter().map(|q| q.component(comp)).collect();
            for (row, m) in m2.iter_mut().zip(natural_spline_second_derivatives(&self.times, &y)) {
                row[comp] = m;
            }
        }
        self.m2 = m2;
        Ok(())
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    fn eval(&self, t: f64) -> Result<Quaternion, CoeffError> {
        let (lo, hi) = self.span();
        if !(t >= lo && t <= hi) {
            return Err(CoeffError::OutOfDomain { t, lo, hi });
        }
        let i = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            p if p >= self.times.len() => self.times.len() - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.times[i], self.times[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let linear = y0 * a + y1 * b;
        if self.interp == Interp::Linear {
            return Ok(linear);
        }
        let m2 = if self.m2.len() == self.times.len() {
            std::borrow::Cow::Borrowed(&self.m2)
        } else {
            let mut tmp = self.clone();
            tmp.prepare("table")?;
            std::borrow::Cow::Owned(tmp.m2)
        };
        let (m0, m1) = (Quaternion::from(m2[i]), Quaternion::from(m2[i + 1]));
        let corr = (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0);
        Ok(linear + corr)
    }
}

impl CoeffFn {
    pub fn zero() -> Self {
        CoeffFn::Const(Quaternion::ZERO)
    }

    pub fn constant(q: Quaternion) -> Self {
        CoeffFn::Const(q)
    }

    /// Real-valued coefficient `f(t)` in the scalar slot.
    pub fn real(f: RealFn) -> Self {
        CoeffFn::Components(Box::new([f, RealFn::Const(0.0), RealFn::Const(0.0), RealFn::Const(0.0)]))
    }

    pub fn components(c: [RealFn; 4]) -> Self {
        CoeffFn::Components(Box::new(c))
    }

    pub fn table(times: Vec<f64>, values: Vec<Quaternion>, interp: Interp) -> Result<Self, CoeffError> {
        Ok(CoeffFn::Table(Table::new(times, values, interp)?))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CoeffFn::Const(q) => *q == Quaternion::ZERO,
            CoeffFn::Poly(p) | CoeffFn::Exp(ExpSpec { poly: p, .. }) | CoeffFn::Trig(TrigSpec { poly: p, .. }) => {
                p.iter().all(|c| c.iter().all(|&x| x == 0.0))
            }
            CoeffFn::Bump(b) => b.value == Quaternion::ZERO,
            CoeffFn::Components(c) => c.iter().all(RealFn::is_zero),
            CoeffFn::Table(t) => t.values.iter().all(|q| *q == Quaternion::ZERO),
        }
    }

    /// Domain over which `eval` succeeds (before the left endpoint of the owning set).
    pub fn domain(&self) -> (f64, f64) {
        match self {
            CoeffFn::Table(t) => t.span(),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn eval(&self, t: f64) -> Result<Quaternion, CoeffError> {
        let per = |p: &[Vec<f64>; 4], w: f64| {
            Quaternion::new(horner(&p[0], t) * w, horner(&p[1], t) * w, horner(&p[2], t) * w, horner(&p[3], t) * w)
        };
        Ok(match self {
            CoeffFn::Const(q) => *q,
            CoeffFn::Poly(p) => per(p, 1.0),
            CoeffFn::Exp(e) => per(&e.poly, (e.rate * t).exp()),
            CoeffFn::Trig(tr) => {
                let arg = tr.omega * t + tr.phase;
                let w = match tr.func {
                    TrigFn::Cos => arg.cos(),
                    TrigFn::Sin => arg.sin(),
                };
                per(&tr.poly, w)
            }
            CoeffFn::Bump(b) => b.value * bump_profile(b.center, b.half_width, t),
            CoeffFn::Components(c) => Quaternion::new(c[0].eval(t), c[1].eval(t), c[2].eval(t), c[3].eval(t)),
            CoeffFn::Table(tab) => tab.eval(t)?,
        })
    }

    /// Componentwise adaptive quadrature over `[t1, t2]`; absolute error estimate `<= tol` per component.
    pub fn integrate(&self, t1: f64, t2: f64, tol: f64) -> Result<Quaternion, CoeffError> {
        let (lo, hi) = self.domain();
        for t in [t1, t2] {
            if !(t >= lo && t <= hi) {
                return Err(CoeffError::OutOfDomain { t, lo, hi });
            }
        }
        if let CoeffFn::Const(q) = self {
            return Ok(*q * (t2 - t1));
        }
        let mut out = [0.0; 4];
        for (component, slot) in out.iter_mut().enumerate() {
            let r = quadrature::integrate(|t| self.eval(t).map(|q| q.component(component)).unwrap_or(f64::NAN), t1, t2, tol)
                .map_err(|source| CoeffError::ToleranceNotMet { component, source })?;
            *slot = r.value;
        }
        Ok(Quaternion::from(out))
    }

    /// Diagnosis of `∫_{from}^{∞}` for this coefficient, derived from its kind.
    pub fn tail_bound(&self, from: f64) -> TailBound {
        if self.is_zero() {
            return TailBound::Bounded(0.0);
        }
        match self {
            CoeffFn::Const(_) | CoeffFn::Poly(_) | CoeffFn::Trig(_) => TailBound::NonAbsolutelyConvergent,
            CoeffFn::Exp(e) => e
                .poly
                .iter()
                .map(|p| RealFn::Exp { rate: e.rate, poly: p.clone() }.tail_bound(from))
                .fold(TailBound::Bounded(0.0), TailBound::combine),
            CoeffFn::Bump(b) => TailBound::Bounded(b.value.norm() * (b.center + b.half_width.abs() - from).max(0.0)),
            CoeffFn::Components(c) => c.iter().map(|f| f.tail_bound(from)).fold(TailBound::Bounded(0.0), TailBound::combine),
            CoeffFn::Table(_) => TailBound::Unknown,
        }
    }

    /// Improper integral `∫_{t1}^{∞}` realized as `∫_{t1}^{t_max}` plus a kind-derived tail diagnosis.
    pub fn integrate_to_infinity(&self, t1: f64, t_max: f64, tol: f64) -> Result<ImproperIntegral, CoeffError> {
        Ok(ImproperIntegral {
            truncated: self.integrate(t1, t_max, tol)?,
            horizon: t_max,
            tail: self.tail_bound(t_max),
        })
    }

    pub fn negated(&self) -> Self {
        let neg4 = |p: &[Vec<f64>; 4]| p.clone().map(|c| c.into_iter().map(|x| -x).collect());
        match self {
            CoeffFn::Const(q) => CoeffFn::Const(-*q),
            CoeffFn::Poly(p) => CoeffFn::Poly(neg4(p)),
            CoeffFn::Exp(e) => CoeffFn::Exp(ExpSpec { rate: e.rate, poly: neg4(&e.poly) }),
            CoeffFn::Trig(t) => CoeffFn::Trig(TrigSpec { poly: neg4(&t.poly), ..t.clone() }),
            CoeffFn::Bump(b) => CoeffFn::Bump(BumpSpec { value: -b.value, ..b.clone() }),
            CoeffFn::Components(c) => CoeffFn::Components(Box::new([
                c[0].negated(),
                c[1].negated(),
                c[2].negated(),
                c[3].negated(),
            ])),
            CoeffFn::Table(t) => {
                let mut n = Table {
                    times: t.times.clone(),
                    values: t.values.iter().map(|q| -*q).collect(),
                    interp: t.interp,
                    m2: Vec::new(),
                };
                n.prepare("table").expect("negation preserves a valid grid");
                CoeffFn::Table(n)
            }
        }
    }

    pub(crate) fn prepare(&mut self, path: &str) -> Result<(), CoeffError> {
        match self {
            CoeffFn::Table(t) => t.prepare(path),
            CoeffFn::Bump(b) if !(b.half_width > 0.0) => Err(CoeffError::Schema {
                path: path.to_string(),
                message: "half_width must be positive".into(),
            }),
            CoeffFn::Components(c) => {
                for (n, f) in c.iter().enumerate() {
                    if let RealFn::Bump { half_width, .. } = f {
                        if !(*half_width > 0.0) {
                            return Err(CoeffError::Schema {
                                path: format!("{path}.components[{n}]"),
                                message: "half_width must be positive".into(),
                            });
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImproperIntegral {
    pub truncated: Quaternion,
    pub horizon: f64,
    pub tail: TailBound,
}

/// The four coefficients of `q' + q a q + b q + q c + d = 0` and the left endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSet {
    pub t0: f64,
    #[serde(default)]
    pub a: CoeffFn,
    #[serde(default)]
    pub b: CoeffFn,
    #[serde(default)]
    pub c: CoeffFn,
    #[serde(default)]
    pub d: CoeffFn,
}

pub(crate) fn schema_error<E: std::fmt::Display>(err: serde_path_to_error::Error<E>) -> CoeffError {
    let path = err.path().to_string();
    CoeffError::Schema { path, message: err.into_inner().to_string() }
}

impl CoeffSet {
    pub fn new(t0: f64, a: CoeffFn, b: CoeffFn, c: CoeffFn, d: CoeffFn) -> Self {
        Self { t0, a, b, c, d }
    }

    pub fn parse(text: &str) -> Result<Self, CoeffError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut set: CoeffSet = serde_path_to_error::deserialize(de).map_err(schema_error)?;
        set.prepare("")?;
        Ok(set)
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficient sets always serialize")
    }

    pub(crate) fn prepare(&mut self, prefix: &str) -> Result<(), CoeffError> {
        let join = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}.{name}") };
        self.a.prepare(&join("a"))?;
        self.b.prepare(&join("b"))?;
        self.c.prepare(&join("c"))?;
        self.d.prepare(&join("d"))
    }

    fn check(&self, t: f64) -> Result<(), CoeffError> {
        if t < self.t0 - 1e-12 * (1.0 + self.t0.abs()) {
            return Err(CoeffError::OutOfDomain { t, lo: self.t0, hi: f64::INFINITY });
        }
        Ok(())
    }

    /// `(a(t), b(t), c(t), d(t))`.
    pub fn eval(&self, t: f64) -> Result<[Quaternion; 4], CoeffError> {
        self.check(t)?;
        Ok([self.a.eval(t)?, self.b.eval(t)?, self.c.eval(t)?, self.d.eval(t)?])
    }

    /// Right end of the common validity interval.
    pub fn domain_end(&self) -> f64 {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .map(|f| f.domain().1)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn t_cos_t() -> CoeffFn {
        CoeffFn::real(RealFn::Trig { omega: 1.0, phase: 0.0, func: TrigFn::Cos, poly: vec![0.0, 1.0] })
    }

    #[test]
    fn eval_examples() {
        assert_eq!(CoeffFn::constant(Quaternion::I).eval(7.0).unwrap(), Quaternion::I);
        let v = t_cos_t().eval(PI).unwrap();
        assert!((v.q0 + PI).abs() < 1e-14);
        let tab = CoeffFn::table(vec![0.0, 1.0], vec![Quaternion::real(1.0), Quaternion::real(3.0)], Interp::Linear).unwrap();
        assert_eq!(tab.eval(0.5).unwrap(), Quaternion::real(2.0));
        assert!(matches!(tab.eval(1.5), Err(CoeffError::OutOfDomain { .. })));
    }

    #[test]
    fn out_of_domain_before_t0() {
        let set = CoeffSet::new(1.0, CoeffFn::zero(), CoeffFn::zero(), CoeffFn::zero(), CoeffFn::zero());
        assert!(matches!(set.eval(0.5), Err(CoeffError::OutOfDomain { .. })));
        assert!(set.eval(1.0).is_ok());
    }

    #[test]
    fn cubic_table_reproduces_linear_data_and_interpolates_smooth_data() {
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25).collect();
        let values: Vec<Quaternion> = times.iter().map(|&t| Quaternion::new(2.0 * t - 1.0, t.sin(), 0.0, -t)).collect();
        let tab = CoeffFn::table(times, values, Interp::Cubic).unwrap();
        let v = tab.eval(2.13).unwrap();
        assert!((v.q0 - (2.0 * 2.13 - 1.0)).abs() < 1e-12);
        assert!((v.q1 - 2.13f64.sin()).abs() < 1e-3);
        assert!((v.q3 + 2.13).abs() < 1e-12);
    }

    #[test]
    fn integrate_examples() {
        let e = CoeffFn::real(RealFn::Exp { rate: -1.0, poly: vec![1.0] });
        let v = e.integrate(0.0, 40.0, 1e-10).unwrap();
        assert!((v.q0 - (1.0 - (-40f64).exp())).abs() < 1e-10);
        let t = 4.2;
        let v = t_cos_t().integrate(0.0, t, 1e-10).unwrap();
        assert!((v.q0 - (t * t.sin() + t.cos() - 1.0)).abs() < 1e-10);
        assert_eq!(CoeffFn::zero().integrate(-3.0, 8.0, 1e-10).unwrap(), Quaternion::ZERO);
    }

    #[test]
    fn improper_tails() {
        let e = CoeffFn::real(RealFn::Exp { rate: -1.0, poly: vec![1.0] });
        let r = e.integrate_to_infinity(0.0, 40.0, 1e-12).unwrap();
        match r.tail {
            TailBound::Bounded(b) => assert!((b - (-40f64).exp()).abs() < 1e-25),
            other => panic!("{other:?}"),
        }
        // ∫_T^∞ t e^{-t} = (T+1) e^{-T}
        let te = CoeffFn::real(RealFn::Exp { rate: -1.0, poly: vec![0.0, 1.0] });
        match te.tail_bound(3.0) {
            TailBound::Bounded(b) => assert!((b - 4.0 * (-3f64).exp()).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
        assert_eq!(t_cos_t().tail_bound(10.0), TailBound::NonAbsolutelyConvergent);
        let bump = CoeffFn::real(RealFn::Bump { center: 1.0, half_width: 1.0, height: 1.0 });
        assert_eq!(bump.tail_bound(2.5), TailBound::Bounded(0.0));
        assert_eq!(CoeffFn::zero().tail_bound(0.0), TailBound::Bounded(0.0));
    }

    #[test]
    fn bump_integral() {
        let bump = CoeffFn::real(RealFn::Bump { center: 1.0, half_width: 1.0, height: 1.0 });
        let v = bump.integrate(0.0, 5.0, 1e-12).unwrap();
        assert!((v.q0 - 16.0 / 15.0).abs() < 1e-11);
    }

    #[test]
    fn parse_examples() {
        let s = CoeffSet::parse(r#"{"t0": 0, "a": {"const": [0,1,0,0]}}"#).unwrap();
        assert_eq!(s.a, CoeffFn::constant(Quaternion::I));
        assert!(s.b.is_zero() && s.c.is_zero() && s.d.is_zero());

        let s = CoeffSet::parse(
            r#"{"t0": 2.798386045783887, "a": {"components": [
                {"trig": {"omega": 1, "func": "cos", "poly": [0, 1]}},
                {"const": 0}, {"const": 0}, {"const": 0}]}}"#,
        )
        .unwrap();
        assert_eq!(s.a, t_cos_t());

        match CoeffSet::parse(r#"{"t0": 0, "a": {"wavelet": [1]}}"#) {
            Err(CoeffError::Schema { path, .. }) => assert_eq!(path, "a"),
            other => panic!("{other:?}"),
        }
        match CoeffSet::parse(r#"{"t0": 0, "d": {"table": {"times": [0, 0], "values": [[1,0,0,0],[1,0,0,0]]}}}"#) {
            Err(CoeffError::Schema { path, .. }) => assert_eq!(path, "d"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serialize_round_trip() {
        let set = CoeffSet::new(
            -1.0,
            CoeffFn::Exp(ExpSpec { rate: -2.0, poly: [vec![1.0], vec![], vec![0.5, 1.0], vec![]] }),
            CoeffFn::Trig(TrigSpec { omega: 2.0, phase: 0.1, func: TrigFn::Sin, poly: [vec![1.0], vec![], vec![], vec![3.0]] }),
            CoeffFn::table(vec![-1.0, 0.0, 2.0], vec![Quaternion::I, Quaternion::J, Quaternion::K], Interp::Cubic).unwrap(),
            CoeffFn::Bump(BumpSpec { center: 1.0, half_width: 0.5, value: Quaternion::new(1.0, 2.0, 3.0, 4.0) }),
        );
        assert_eq!(CoeffSet::parse(&set.serialize()).unwrap(), set);
    }
}
