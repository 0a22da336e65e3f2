//! First-order quaternionic linear systems `φ' = a11 φ + a12 ψ`, `ψ' = a21 φ + a22 ψ` and
//! their bridge to the Riccati equation of the ratio `q = ψ φ⁻¹`.

mod thm42;

pub use thm42::{
    thm42_check, thm42_check_with, thm43_sign_check, Alpha, Conclusion, PTable, SignCheck, Thm42Report, Thm42Sample,
    Violation, ALPHA_GRID, WEAK_TOL,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{CoeffError, CoeffFn, CoeffSet};
use crate::ode::{self, Accumulator, OdeError, OdeProblem, Tolerances, Trajectory};
use crate::quadrature::gk15_vec;
use crate::quat::Quaternion;
use crate::riccati::{tail_diagnosis, RiccatiEq, RiccatiError, RiccatiPath, TailParams, TailStatus, TAIL_TOL, TAIL_WINDOWS};

/// Absolute tolerance for the `(φ, ψ)` slots of linear solves; error control is effectively relative so that
/// exponentially small solutions keep their digits.
pub const LINEAR_ATOL: f64 = 1e-300;
/// Default relative tolerance for linear solves, tight enough for pointwise residuals of 1e-8.
pub const LINEAR_RTOL: f64 = 1e-10;
/// Partial-sum level beyond which a monotone statement-2 integral counts as divergent.
pub const STATEMENT2_DIVERGE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearError {
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("φ vanishes at t = {t}")]
    PhiVanishes { t: f64 },
    #[error("invalid index set {0:?}: expected a nonempty subset of {{0,1,2,3}}")]
    InvalidIndexSet(Vec<usize>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSystem {
    pub t0: f64,
    #[serde(default)]
    pub a11: CoeffFn,
    #[serde(default)]
    pub a12: CoeffFn,
    #[serde(default)]
    pub a21: CoeffFn,
    #[serde(default)]
    pub a22: CoeffFn,
}

impl LinearSystem {
    pub fn new(t0: f64, a11: CoeffFn, a12: CoeffFn, a21: CoeffFn, a22: CoeffFn) -> Self {
        Self { t0, a11, a12, a21, a22 }
    }

    /// `[a11, a12, a21, a22]` at `t`.
    pub fn eval(&self, t: f64) -> Result<[Quaternion; 4], CoeffError> {
        if t < self.t0 - 1e-12 * (1.0 + self.t0.abs()) {
            return Err(CoeffError::OutOfDomain { t, lo: self.t0, hi: f64::INFINITY });
        }
        Ok([self.a11.eval(t)?, self.a12.eval(t)?, self.a21.eval(t)?, self.a22.eval(t)?])
    }

    pub fn domain_end(&self) -> f64 {
        [&self.a11, &self.a12, &self.a21, &self.a22].iter().map(|f| f.domain().1).fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn prepare(&mut self, prefix: &str) -> Result<(), CoeffError> {
        let join = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}.{name}") };
        self.a11.prepare(&join("a11"))?;
        self.a12.prepare(&join("a12"))?;
        self.a21.prepare(&join("a21"))?;
        self.a22.prepare(&join("a22"))
    }

    /// `(φ', ψ')` for the pair `(φ, ψ)`.
    pub fn apply(&self, t: f64, phi: Quaternion, psi: Quaternion) -> Result<(Quaternion, Quaternion), CoeffError> {
        let [a11, a12, a21, a22] = self.eval(t)?;
        Ok((a11 * phi + a12 * psi, a21 * phi + a22 * psi))
    }
}

/// Riccati form of the ratio `q = ψ φ⁻¹`: `a = a12`, `c = a11`, `b = −a22`, `d = −a21`.
pub fn to_riccati(sys: &LinearSystem) -> RiccatiEq {
    RiccatiEq::new(CoeffSet::new(sys.t0, sys.a12.clone(), sys.a22.negated(), sys.a11.clone(), sys.a21.negated()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearOptions {
    pub rtol: f64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self { rtol: LINEAR_RTOL }
    }
}

impl LinearOptions {
    fn tol(&self) -> Tolerances {
        Tolerances::new(self.rtol, ode::DEFAULT_ATOL)
    }
}

pub type SharedPath = Arc<dyn RiccatiPath + Send + Sync>;

#[derive(Clone)]
enum PsiSource {
    /// ψ is the second state slot.
    Slot,
    /// ψ = q φ for a Riccati path.
    Lifted(SharedPath, RiccatiEq),
}

/// A solution pair `(φ, ψ)` anchored at `t1`.
///
/// Accumulators: `re` holds `∫Re[a12 q + a11]` with `q = ψ φ⁻¹`, `s` holds `∫(Re a11 + Re a22)`.
#[derive(Clone)]
pub struct SystemSolution {
    sys: LinearSystem,
    t1: f64,
    traj: Trajectory,
    psi: PsiSource,
    re_at: usize,
    s_at: usize,
    regular: bool,
}

impl std::fmt::Debug for SystemSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemSolution")
            .field("t1", &self.t1)
            .field("t_last", &self.traj.t_last())
            .field("lifted", &matches!(self.psi, PsiSource::Lifted(..)))
            .field("regular", &self.regular)
            .finish()
    }
}

fn real_parts(sys: &LinearSystem, t: f64, q: Quaternion) -> Result<[f64; 2], OdeError> {
    let [a11, a12, _, a22] = sys.eval(t).map_err(|e| OdeError::rhs(t, e))?;
    Ok([(a12 * q + a11).re(), a11.re() + a22.re()])
}

/// Integrates the system directly from `(φ1, ψ1)` at `t1`.
pub fn solve_system(
    sys: &LinearSystem,
    t1: f64,
    phi1: Quaternion,
    psi1: Quaternion,
    t_end: f64,
    opts: &LinearOptions,
) -> Result<SystemSolution, LinearError> {
    check_interval(sys, t1, t_end)?;
    if phi1.norm() == 0.0 {
        return Err(LinearError::PhiVanishes { t: t1 });
    }
    let mut y0 = vec![0.0; 8];
    phi1.write_to(&mut y0[..4]);
    psi1.write_to(&mut y0[4..]);
    let problem = OdeProblem::new(2, t1, y0, |t, y, dy| {
        let (dphi, dpsi) = sys
            .apply(t, Quaternion::from_slice(&y[..4]), Quaternion::from_slice(&y[4..]))
            .map_err(|e| OdeError::rhs(t, e))?;
        dphi.write_to(&mut dy[..4]);
        dpsi.write_to(&mut dy[4..]);
        Ok(())
    })
    .with_escape_norm(f64::INFINITY)
    .with_state_atol(LINEAR_ATOL);
    let acc = Accumulator::new("re", 2, |t, y, out| {
        let q = Quaternion::from_slice(&y[4..]) * Quaternion::from_slice(&y[..4]).recip();
        out.copy_from_slice(&real_parts(sys, t, q)?);
        Ok(())
    });
    let traj = ode::solve(&problem, t_end, opts.tol(), &[acc])?;
    Ok(SystemSolution::finish(sys, t1, traj, PsiSource::Slot))
}

/// Integrates `φ' = [a12 q + a11] φ` along a Riccati path and sets `ψ = q φ`.
pub fn lift(sys: &LinearSystem, path: SharedPath, phi1: Quaternion, t_end: f64, opts: &LinearOptions) -> Result<SystemSolution, LinearError> {
    let (t1, hi) = path.span();
    if t_end > hi {
        return Err(LinearError::InvalidInput(format!("lift end {t_end} beyond the path end {hi}")));
    }
    check_interval(sys, t1, t_end)?;
    if phi1.norm() == 0.0 {
        return Err(LinearError::PhiVanishes { t: t1 });
    }
    let q_at = |t: f64| path.q(t).map_err(|e| OdeError::rhs(t, e));
    let problem = OdeProblem::new(1, t1, phi1.to_array().to_vec(), |t, y, dy| {
        let [a11, a12, _, _] = sys.eval(t).map_err(|e| OdeError::rhs(t, e))?;
        ((a12 * q_at(t)? + a11) * Quaternion::from_slice(y)).write_to(dy);
        Ok(())
    })
    .with_escape_norm(f64::INFINITY)
    .with_state_atol(LINEAR_ATOL);
    let acc = Accumulator::new("re", 2, |t, _, out| {
        out.copy_from_slice(&real_parts(sys, t, q_at(t)?)?);
        Ok(())
    });
    let traj = ode::solve(&problem, t_end, opts.tol(), &[acc])?;
    drop(problem);
    let eq = to_riccati(sys);
    Ok(SystemSolution::finish(sys, t1, traj, PsiSource::Lifted(path.clone(), eq)))
}

fn check_interval(sys: &LinearSystem, t1: f64, t_end: f64) -> Result<(), LinearError> {
    if t1 < sys.t0 {
        return Err(RiccatiError::BeforeStart { t1, t0: sys.t0 }.into());
    }
    let domain_end = sys.domain_end();
    if t_end > domain_end {
        return Err(RiccatiError::BeyondDomain { t_end, domain_end }.into());
    }
    Ok(())
}

impl SystemSolution {
    fn finish(sys: &LinearSystem, t1: f64, traj: Trajectory, psi: PsiSource) -> Self {
        let (re_at, _) = traj.accumulator_offset("re").expect("registered");
        let regular = (0..traj.times().len()).all(|k| {
            let p = Quaternion::from_slice(&traj.state_at_step(k)[..4]).norm();
            p > 0.0 && p.is_finite()
        });
        Self { sys: sys.clone(), t1, traj, psi, re_at, s_at: re_at + 1, regular }
    }

    pub fn system(&self) -> &LinearSystem {
        &self.sys
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t_last(&self) -> f64 {
        self.traj.t_last()
    }

    pub fn times(&self) -> &[f64] {
        self.traj.times()
    }

    /// `φ(t) ≠ 0` at every accepted step.
    pub fn is_regular(&self) -> bool {
        self.regular
    }

    pub fn is_lifted(&self) -> bool {
        matches!(self.psi, PsiSource::Lifted(..))
    }

    pub fn phi(&self, t: f64) -> Result<Quaternion, LinearError> {
        Ok(self.traj.slot(t, 0)?)
    }

    pub fn pair(&self, t: f64) -> Result<(Quaternion, Quaternion), LinearError> {
        let phi = self.phi(t)?;
        let psi = match &self.psi {
            PsiSource::Slot => self.traj.slot(t, 1)?,
            PsiSource::Lifted(path, _) => path.q(t)? * phi,
        };
        Ok((phi, psi))
    }

    pub fn psi(&self, t: f64) -> Result<Quaternion, LinearError> {
        Ok(self.pair(t)?.1)
    }

    /// `(φ', ψ')` from the integrated trajectory (dense derivative, and `q' φ + q φ'` for lifts).
    pub fn derivative(&self, t: f64) -> Result<(Quaternion, Quaternion), LinearError> {
        let d = self.traj.derivative(t)?;
        let dphi = Quaternion::from_slice(&d[..4]);
        let dpsi = match &self.psi {
            PsiSource::Slot => Quaternion::from_slice(&d[4..8]),
            PsiSource::Lifted(path, eq) => {
                let q = path.q(t)?;
                eq.rhs(t, q)? * self.phi(t)? + q * dphi
            }
        };
        Ok((dphi, dpsi))
    }

    /// `∫_{t1}^t Re[a12 q + a11]`.
    pub fn re_integral(&self, t: f64) -> Result<f64, LinearError> {
        Ok(self.traj.query(t)?[self.re_at])
    }

    /// `∫_{t1}^t (Re a11 + Re a22)`.
    pub fn trace_integral(&self, t: f64) -> Result<f64, LinearError> {
        Ok(self.traj.query(t)?[self.s_at])
    }

    /// `q = ψ φ⁻¹`.
    pub fn q(&self, t: f64) -> Result<Quaternion, LinearError> {
        let (phi, psi) = self.pair(t)?;
        if !(phi.norm() > f64::MIN_POSITIVE) {
            return Err(LinearError::PhiVanishes { t });
        }
        Ok(psi * phi.recip())
    }

    /// `(min |φ|, max |φ|)` over the accepted steps.
    pub fn phi_range(&self) -> (f64, f64) {
        (0..self.times().len())
            .map(|k| Quaternion::from_slice(&self.traj.state_at_step(k)[..4]).norm())
            .fold((f64::INFINITY, 0.0), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Samples `q = ψ φ⁻¹` on a grid.
pub fn project(ssol: &SystemSolution, grid: &[f64]) -> Result<Vec<Quaternion>, LinearError> {
    grid.iter().map(|&t| ssol.q(t)).collect()
}

impl RiccatiPath for SystemSolution {
    fn span(&self) -> (f64, f64) {
        (self.t1, self.t_last())
    }

    fn q(&self, t: f64) -> Result<Quaternion, RiccatiError> {
        SystemSolution::q(self, t).map_err(|e| match e {
            LinearError::Riccati(r) => r,
            LinearError::Ode(o) => RiccatiError::Ode(o),
            LinearError::Coeff(c) => RiccatiError::Coeff(c),
            other => RiccatiError::Ode(OdeError::rhs(t, other)),
        })
    }
}

/// `(|φ(t)|, |φ(t1)| exp ∫_{t1}^t Re[a12 q + a11])`.
pub fn modulus_formula_check(ssol: &SystemSolution, t: f64) -> Result<(f64, f64), LinearError> {
    let lhs = ssol.phi(t)?.norm();
    let rhs = ssol.phi(ssol.t1)?.norm() * ssol.re_integral(t)?.exp();
    Ok((lhs, rhs))
}

/// A transformation applied to a solution pair before substituting it into the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    Identity,
    Right(Quaternion),
    Left(Quaternion),
}

impl Multiplier {
    fn apply(&self, x: Quaternion) -> Quaternion {
        match *self {
            Multiplier::Identity => x,
            Multiplier::Right(l) => x * l,
            Multiplier::Left(l) => l * x,
        }
    }
}

/// `|φ̃' − a11 φ̃ − a12 ψ̃| + |ψ̃' − a21 φ̃ − a22 ψ̃|` for the transformed pair, divided by
/// `max(1, |φ̃| + |ψ̃|)`.
pub fn residual(ssol: &SystemSolution, t: f64, m: Multiplier) -> Result<f64, LinearError> {
    let (phi, psi) = ssol.pair(t)?;
    let (dphi, dpsi) = ssol.derivative(t)?;
    let (phi, psi, dphi, dpsi) = (m.apply(phi), m.apply(psi), m.apply(dphi), m.apply(dpsi));
    let (fphi, fpsi) = ssol.sys.apply(t, phi, psi)?;
    Ok(((dphi - fphi).norm() + (dpsi - fpsi).norm()) / (phi.norm() + psi.norm()).max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioTrend {
    MonotoneToZero,
    BoundedBothWays,
    Growing,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub grid: Vec<f64>,
    pub ratios: Vec<f64>,
    pub trend: RatioTrend,
    /// `ratio(last) / ratio(first)`.
    pub final_over_initial: f64,
    pub monotone_decreasing: bool,
    /// `(max − min) / mean` of the ratio over the last ten time units of the grid.
    pub last_decade_drift: f64,
}

/// `|φ_A| / |φ_B|` on a grid with a trend summary.
pub fn asymptotic_ratios(a: &SystemSolution, b: &SystemSolution, grid: &[f64]) -> Result<RatioSeries, LinearError> {
    if grid.len() < 2 {
        return Err(LinearError::InvalidInput("ratio grid needs at least two points".into()));
    }
    let ratios: Vec<f64> =
        grid.iter().map(|&t| Ok(a.phi(t)?.norm() / b.phi(t)?.norm())).collect::<Result<_, LinearError>>()?;
    let first = ratios[0];
    let last = *ratios.last().unwrap();
    let monotone_decreasing = ratios.windows(2).all(|w| w[1] <= w[0]);
    let monotone_increasing = ratios.windows(2).all(|w| w[1] >= w[0]);
    let t_end = *grid.last().unwrap();
    let tail: Vec<f64> = grid.iter().zip(&ratios).filter(|(t, _)| **t >= t_end - 10.0).map(|(_, r)| *r).collect();
    let (lo, hi) = tail.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let last_decade_drift = (hi - lo) / mean;
    let (min_all, max_all) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let trend = if monotone_decreasing && last < 1e-3 * first {
        RatioTrend::MonotoneToZero
    } else if monotone_increasing && last > 1e3 * first {
        RatioTrend::Growing
    } else if min_all > 0.0 && max_all / min_all < 1e3 {
        RatioTrend::BoundedBothWays
    } else {
        RatioTrend::Unknown
    };
    Ok(RatioSeries {
        grid: grid.to_vec(),
        ratios,
        trend,
        final_over_initial: last / first,
        monotone_decreasing,
        last_decade_drift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailIntegral {
    pub status: TailStatus,
    /// Partial integral up to the horizon.
    pub value: f64,
}

/// `∫_T^H |a12| / |φ|² · exp ∫_T^τ (Re a11 + Re a22)` with a windowed convergence diagnosis.
pub fn statement2_integral(ssol: &SystemSolution, from: f64, horizon: f64) -> Result<TailIntegral, LinearError> {
    let hi = horizon.min(ssol.t_last());
    if !(from >= ssol.t1 && from < hi) {
        return Err(LinearError::InvalidInput(format!("window [{from}, {hi}] outside the solution")));
    }
    let s_from = ssol.trace_integral(from)?;
    let integrand = |t: f64| -> [f64; 1] {
        let v = || -> Result<f64, LinearError> {
            let a12 = ssol.sys.a12.eval(t)?;
            let phi = ssol.phi(t)?;
            Ok(a12.norm() / phi.norm_sq() * (ssol.trace_integral(t)? - s_from).exp())
        };
        [v().unwrap_or(f64::NAN)]
    };
    let params = TailParams { tail_tol: TAIL_TOL, diverge_threshold: STATEMENT2_DIVERGE };
    let (status, value) = windowed(ssol.times(), from, hi, integrand, &params)?;
    Ok(TailIntegral { status, value })
}

/// Integrates a scalar on the step nodes within `[from, hi]` and diagnoses the window partials.
pub(crate) fn windowed(
    steps: &[f64],
    from: f64,
    hi: f64,
    mut f: impl FnMut(f64) -> [f64; 1],
    params: &TailParams,
) -> Result<(TailStatus, f64), LinearError> {
    let mut nodes = vec![from];
    nodes.extend(steps.iter().copied().filter(|&t| t > from && t < hi));
    for j in 1..TAIL_WINDOWS {
        nodes.push(from + (hi - from) * j as f64 / TAIL_WINDOWS as f64);
    }
    nodes.push(hi);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut cum = vec![0.0; nodes.len()];
    for k in 1..nodes.len() {
        let sub = 4;
        let mut acc = 0.0;
        for i in 0..sub {
            let a = nodes[k - 1] + (nodes[k] - nodes[k - 1]) * i as f64 / sub as f64;
            let b = nodes[k - 1] + (nodes[k] - nodes[k - 1]) * (i + 1) as f64 / sub as f64;
            acc += gk15_vec(&mut f, a, b).0[0];
        }
        if !acc.is_finite() {
            return Err(LinearError::InvalidInput(format!("non-finite integrand near t = {}", nodes[k])));
        }
        cum[k] = cum[k - 1] + acc;
    }
    let partials: Vec<Quaternion> = (1..=TAIL_WINDOWS)
        .map(|j| {
            let tj = if j == TAIL_WINDOWS { hi } else { from + (hi - from) * j as f64 / TAIL_WINDOWS as f64 };
            let idx = nodes.partition_point(|&x| x < tj);
            Quaternion::real(cum[idx.min(nodes.len() - 1)])
        })
        .collect();
    Ok((tail_diagnosis(&partials, params), *cum.last().unwrap()))
}
