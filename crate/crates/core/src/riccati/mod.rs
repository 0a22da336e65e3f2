//! The quaternionic Riccati equation `q' + q a q + b q + q c + d = 0`, its companion
//! linear equations, the solution-family formula and the normal/extremal machinery.

mod classify;
mod oracle;
mod tail;

pub use classify::{
    classify, classify_with, equation_verdict, seed_report, theorem31_witness, ClassifyOptions, ClassificationReport,
    EquationVerdict, NuSummary, SeedReport,
    SeedVerdict, WitnessReport, MU_EXTREMAL, PLATEAU_TOL,
};
pub use oracle::{matrix_oracle_check, matrix_oracle_with, MatrixOracleReport};
pub use tail::{
    extremal_candidate, extremal_solution, nu_tail, nu_tail_with, statement5_integral, tail_diagnosis, ExtremalSolution,
    NuTable, NuTail, TailParams, TailStatus, NU_GRID, NU_ZERO_TOL, TAIL_TOL, TAIL_WINDOWS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{CoeffError, CoeffSet};
use crate::quadrature::QuadError;
use crate::ode::{self, Accumulator, OdeError, OdeProblem, Status, Tolerances, Trajectory, ESCAPE_REFINE_NORM};
use crate::quat::{Quaternion, EPS_ZERO};

pub const DEFAULT_HORIZON: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiccatiError {
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("anchor t1 = {t1} precedes the left endpoint t0 = {t0}")]
    BeforeStart { t1: f64, t0: f64 },
    #[error("t_end = {t_end} lies beyond the coefficient domain end {domain_end}")]
    BeyondDomain { t_end: f64, domain_end: f64 },
    #[error("family member is singular at t = {t}: |1 + λμ| = {norm:e}")]
    FamilySingular { t: f64, norm: f64 },
    #[error("tail integral vanishes at t = {t}: |ν| = {norm:e}")]
    NuVanishes { t: f64, norm: f64 },
    #[error("tail integral is not convergent ({0:?})")]
    TailNotConverged(TailStatus),
    #[error("t = {t} outside the solution interval [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiEq {
    pub coeffs: CoeffSet,
}

/// `−(q a q + b q + q c + d)` for already-evaluated coefficients `[a, b, c, d]`.
pub fn rhs_from(abcd: &[Quaternion; 4], q: Quaternion) -> Quaternion {
    let [a, b, c, d] = *abcd;
    -(q * a * q + b * q + q * c + d)
}

impl RiccatiEq {
    pub fn new(coeffs: CoeffSet) -> Self {
        Self { coeffs }
    }

    pub fn t0(&self) -> f64 {
        self.coeffs.t0
    }

    pub fn rhs(&self, t: f64, q: Quaternion) -> Result<Quaternion, RiccatiError> {
        Ok(rhs_from(&self.coeffs.eval(t)?, q))
    }

    fn validate(&self, t1: f64, t_end: f64) -> Result<(), RiccatiError> {
        if t1 < self.t0() {
            return Err(RiccatiError::BeforeStart { t1, t0: self.t0() });
        }
        let domain_end = self.coeffs.domain_end();
        if t_end > domain_end {
            return Err(RiccatiError::BeyondDomain { t_end, domain_end });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: Tolerances,
    pub escape_norm: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default(), escape_norm: ode::DEFAULT_ESCAPE_NORM }
    }
}

/// Anything that yields a Riccati solution value on an interval.
pub trait RiccatiPath {
    fn span(&self) -> (f64, f64);
    fn q(&self, t: f64) -> Result<Quaternion, RiccatiError>;
}

/// Values of every companion quantity at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompanionState {
    pub q: Quaternion,
    pub phi: Quaternion,
    pub psi: Quaternion,
    pub mu: Quaternion,
    pub re_phi: f64,
    pub re_psi: f64,
}

/// A solution `q` together with `φ_q`, `ψ_q`, `μ_q(t1; ·)` and the two real accumulators
/// `∫Re[a q + c]`, `∫Re[a q + b]`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    eq: RiccatiEq,
    t1: f64,
    q1: Quaternion,
    traj: Trajectory,
    mu_at: usize,
    re_at: usize,
}

const MU: &str = "mu";
const RE: &str = "re";

pub fn solve_with_companions(eq: &RiccatiEq, t1: f64, q1: Quaternion, t_end: f64) -> Result<RiccatiSolution, RiccatiError> {
    solve_with_options(eq, t1, q1, t_end, &SolveOptions::default())
}

pub fn solve_with_options(
    eq: &RiccatiEq,
    t1: f64,
    q1: Quaternion,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<RiccatiSolution, RiccatiError> {
    eq.validate(t1, t_end)?;
    let coeffs = &eq.coeffs;
    let mut y0 = vec![0.0; 12];
    q1.write_to(&mut y0[0..4]);
    Quaternion::ONE.write_to(&mut y0[4..8]);
    Quaternion::ONE.write_to(&mut y0[8..12]);
    let problem = OdeProblem::new(3, t1, y0, |t, y, dy| {
        let [a, b, c, d] = coeffs.eval(t).map_err(|e| OdeError::rhs(t, e))?;
        let q = Quaternion::from_slice(&y[0..4]);
        let phi = Quaternion::from_slice(&y[4..8]);
        let psi = Quaternion::from_slice(&y[8..12]);
        (-(q * a * q + b * q + q * c + d)).write_to(&mut dy[0..4]);
        ((a * q + c) * phi).write_to(&mut dy[4..8]);
        (psi * (b + q * a)).write_to(&mut dy[8..12]);
        Ok(())
    })
    .with_escape_norm(opts.escape_norm)
    .with_escape_slots(1);
    let mu = Accumulator::new(MU, 4, |t, y, out| {
        let a = coeffs.a.eval(t).map_err(|e| OdeError::rhs(t, e))?;
        let phi = Quaternion::from_slice(&y[4..8]);
        let psi = Quaternion::from_slice(&y[8..12]);
        (phi.recip() * a * psi.recip()).write_to(out);
        Ok(())
    });
    let re = Accumulator::new(RE, 2, |t, y, out| {
        let [a, b, c, _] = coeffs.eval(t).map_err(|e| OdeError::rhs(t, e))?;
        let aq = a * Quaternion::from_slice(&y[0..4]);
        out[0] = aq.re() + c.re();
        out[1] = aq.re() + b.re();
        Ok(())
    });
    let traj = ode::solve(&problem, t_end, opts.tol, &[mu, re])?;
    let mu_at = traj.accumulator_offset(MU).expect("registered").0;
    let re_at = traj.accumulator_offset(RE).expect("registered").0;
    Ok(RiccatiSolution { eq: eq.clone(), t1, q1, traj, mu_at, re_at })
}

impl RiccatiSolution {
    pub fn equation(&self) -> &RiccatiEq {
        &self.eq
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn q1(&self) -> Quaternion {
        self.q1
    }

    pub fn t_last(&self) -> f64 {
        self.traj.t_last()
    }

    pub fn status(&self) -> Status {
        self.traj.status()
    }

    pub fn is_regular(&self) -> bool {
        self.status() == Status::ReachedEnd
    }

    pub fn escape_time(&self) -> Option<f64> {
        match self.status() {
            Status::Escaped { t_escape } => Some(t_escape),
            _ => None,
        }
    }

    /// Whether the escape looks like a finite-time pole rather than unbounded growth on the
    /// whole horizon: the last hundredfold climb of `|q|` to the escape level must take less
    /// than a tenth of the time of the hundredfold climb before it.
    pub fn escape_is_pole(&self) -> bool {
        let Some(te) = self.escape_time() else { return false };
        let Ok(top) = self.traj.query(te) else { return true };
        let level = self.traj.escape_norm_of(&top);
        let tr = &self.traj;
        match (tr.first_time_norm_reaches(level / 1e4), tr.first_time_norm_reaches(level / 1e2)) {
            (Some(a), Some(b)) if b > self.t1 => te - b < 0.1 * (b - a),
            _ => true,
        }
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    /// Accepted step times.
    pub fn times(&self) -> &[f64] {
        self.traj.times()
    }

    fn unpack(&self, s: &[f64]) -> CompanionState {
        CompanionState {
            q: Quaternion::from_slice(&s[0..4]),
            phi: Quaternion::from_slice(&s[4..8]),
            psi: Quaternion::from_slice(&s[8..12]),
            mu: Quaternion::from_slice(&s[self.mu_at..self.mu_at + 4]),
            re_phi: s[self.re_at],
            re_psi: s[self.re_at + 1],
        }
    }

    pub fn state(&self, t: f64) -> Result<CompanionState, RiccatiError> {
        Ok(self.unpack(&self.traj.query(t)?))
    }

    pub fn state_at_step(&self, k: usize) -> CompanionState {
        self.unpack(self.traj.state_at_step(k))
    }

    pub fn phi(&self, t: f64) -> Result<Quaternion, RiccatiError> {
        Ok(self.state(t)?.phi)
    }

    pub fn psi(&self, t: f64) -> Result<Quaternion, RiccatiError> {
        Ok(self.state(t)?.psi)
    }

    pub fn mu(&self, t: f64) -> Result<Quaternion, RiccatiError> {
        Ok(self.state(t)?.mu)
    }

    /// `|φ_q|` and `|ψ_q|` against the exponentials of their real accumulators:
    /// `(|φ|, exp ∫Re[aq+c], |ψ|, exp ∫Re[aq+b])`.
    pub fn moduli(&self, t: f64) -> Result<(f64, f64, f64, f64), RiccatiError> {
        let s = self.state(t)?;
        Ok((s.phi.norm(), s.re_phi.exp(), s.psi.norm(), s.re_psi.exp()))
    }

    /// Largest relative mismatch of both modulus identities over the accepted steps.
    pub fn max_modulus_deviation(&self) -> f64 {
        (0..self.times().len())
            .map(|k| {
                let s = self.state_at_step(k);
                let (ep, es) = (s.re_phi.exp(), s.re_psi.exp());
                ((s.phi.norm() - ep).abs() / ep).max((s.psi.norm() - es).abs() / es)
            })
            .fold(0.0, f64::max)
    }
}

impl RiccatiPath for RiccatiSolution {
    fn span(&self) -> (f64, f64) {
        (self.t1, self.t_last())
    }

    fn q(&self, t: f64) -> Result<Quaternion, RiccatiError> {
        Ok(self.state(t)?.q)
    }
}

/// `q(t) + ψ⁻¹(t) [1 + λ μ(t1; t)]⁻¹ λ φ⁻¹(t)`: the solution through `q(t1) + λ`.
pub fn family_member(sol: &RiccatiSolution, lambda: Quaternion, t: f64) -> Result<Quaternion, RiccatiError> {
    let s = sol.state(t)?;
    let m = Quaternion::ONE + lambda * s.mu;
    let norm = m.norm();
    if norm <= EPS_ZERO {
        return Err(RiccatiError::FamilySingular { t, norm });
    }
    Ok(s.q + s.psi.recip() * m.recip() * lambda * s.phi.recip())
}

/// First time the family member through `q(t1) + λ` reaches the escape refine norm.
///
/// `|1 + λμ|` is scanned on the base steps (refined to at least 2000 points), local minima are
/// refined by golden-section search, and the crossing is bracketed by bisection.
pub fn family_pole(sol: &RiccatiSolution, lambda: Quaternion) -> Option<f64> {
    let big = |t: f64| match family_member(sol, lambda, t) {
        Ok(v) => v.norm() >= ESCAPE_REFINE_NORM,
        Err(_) => true,
    };
    let gap = |t: f64| sol.mu(t).map(|m| (Quaternion::ONE + lambda * m).norm()).unwrap_or(0.0);
    let (lo, hi) = (sol.t1(), sol.t_last());
    let max_h = (hi - lo) / 2000.0;
    let mut grid = vec![lo];
    for &t in &sol.times()[1..] {
        let prev = *grid.last().unwrap();
        let n = ((t - prev) / max_h).ceil().max(8.0) as usize;
        grid.extend((1..=n).map(|i| if i == n { t } else { prev + (t - prev) * i as f64 / n as f64 }));
    }
    let g: Vec<f64> = grid.iter().map(|&t| gap(t)).collect();
    let bisect = |mut a: f64, mut b: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if big(mid) {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    };
    for i in 0..grid.len() {
        if big(grid[i]) {
            return Some(if i == 0 { grid[0] } else { bisect(grid[i - 1], grid[i]) });
        }
        if i == 0 || i + 1 == grid.len() || g[i] > g[i - 1] || g[i] > g[i + 1] {
            continue;
        }
        let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..120 {
            let (x1, x2) = (b - r * (b - a), a + r * (b - a));
            if gap(x1) <= gap(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let tmin = 0.5 * (a + b);
        if big(tmin) {
            return Some(bisect(grid[i - 1], tmin));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusCheck {
    /// `|1 + λ_{B,A} μ_A(t1; t)|`.
    pub lhs: f64,
    /// `exp ∫ Re[a (q_B − q_A)]`.
    pub rhs: f64,
    /// `|1 + λ_{B,A} μ_A| · |1 + λ_{A,B} μ_B|`.
    pub product: f64,
}

pub fn modulus_identities_check(a: &RiccatiSolution, b: &RiccatiSolution, t: f64) -> Result<ModulusCheck, RiccatiError> {
    let (sa, sb) = (a.state(t)?, b.state(t)?);
    let lambda_ba = b.q1 - a.q1;
    let lhs = (Quaternion::ONE + lambda_ba * sa.mu).norm();
    let other = (Quaternion::ONE - lambda_ba * sb.mu).norm();
    // The c-parts cancel in the difference of the φ accumulators.
    let rhs = (sb.re_phi - sa.re_phi).exp();
    Ok(ModulusCheck { lhs, rhs, product: lhs * other })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoeffFn, RealFn};

    pub(super) fn scalar_a(a: CoeffFn) -> RiccatiEq {
        RiccatiEq::new(CoeffSet::new(0.0, a, CoeffFn::zero(), CoeffFn::zero(), CoeffFn::zero()))
    }

    pub(super) fn exp_decay() -> CoeffFn {
        CoeffFn::real(RealFn::Exp { rate: -1.0, poly: vec![1.0] })
    }

    #[test]
    fn rhs_examples() {
        let eq = scalar_a(CoeffFn::constant(Quaternion::ONE));
        assert_eq!(eq.rhs(0.0, Quaternion::I).unwrap(), Quaternion::ONE);
        let t_cos = CoeffFn::real(RealFn::Trig {
            omega: 1.0,
            phase: 0.0,
            func: crate::coeffs::TrigFn::Cos,
            poly: vec![0.0, 1.0],
        });
        assert_eq!(scalar_a(t_cos).rhs(0.0, Quaternion::ONE).unwrap(), Quaternion::ZERO);
        let abcd = [Quaternion::J, Quaternion::I, Quaternion::K, Quaternion::ONE];
        let q = Quaternion::new(0.5, -1.0, 2.0, 0.25);
        let expect = -(q * Quaternion::J * q + Quaternion::I * q + q * Quaternion::K + Quaternion::ONE);
        assert_eq!(rhs_from(&abcd, q), expect);
    }

    #[test]
    fn zero_solution_companions_are_trivial() {
        let eq = scalar_a(exp_decay());
        let sol = solve_with_companions(&eq, 0.0, Quaternion::ZERO, 5.0).unwrap();
        assert!(sol.is_regular());
        for t in [0.0, 1.3, 5.0] {
            let s = sol.state(t).unwrap();
            assert_eq!(s.q, Quaternion::ZERO);
            assert_eq!(s.phi, Quaternion::ONE);
            assert_eq!(s.psi, Quaternion::ONE);
            assert!((s.mu.re() - (1.0 - (-t).exp())).abs() < 1e-8);
        }
    }

    #[test]
    fn family_member_matches_closed_forms() {
        let one = scalar_a(CoeffFn::constant(Quaternion::ONE));
        let zero_sol = solve_with_companions(&one, 0.0, Quaternion::ZERO, 3.0).unwrap();
        assert_eq!(family_member(&zero_sol, Quaternion::ZERO, 0.7).unwrap(), Quaternion::ZERO);
        let v = family_member(&zero_sol, -Quaternion::ONE, 0.5).unwrap();
        assert!((v.re() + 2.0).abs() < 1e-9);
        assert!(matches!(
            family_member(&zero_sol, -Quaternion::ONE, 1.0),
            Err(RiccatiError::FamilySingular { .. })
        ));
        let pole = family_pole(&zero_sol, -Quaternion::ONE).unwrap();
        assert!((pole - 1.0).abs() < 1e-5, "{pole}");

        let eq = scalar_a(CoeffFn::constant(Quaternion::I));
        let sol = solve_with_companions(&eq, 0.0, Quaternion::ZERO, 2.0).unwrap();
        let v = family_member(&sol, Quaternion::J, 1.0).unwrap();
        assert!(v.max_abs_diff(&Quaternion::new(0.0, -0.5, 0.5, 0.0)) < 1e-9, "{v}");
    }

    #[test]
    fn modulus_identities_hold_for_example_pair() {
        let eq = scalar_a(exp_decay());
        let s0 = solve_with_companions(&eq, 0.0, Quaternion::ZERO, 6.0).unwrap();
        let s1 = solve_with_companions(&eq, 0.0, Quaternion::ONE, 6.0).unwrap();
        let same = modulus_identities_check(&s0, &s0, 3.0).unwrap();
        assert_eq!((same.lhs, same.rhs, same.product), (1.0, 1.0, 1.0));
        for t in [1.0, 2.5, 5.0] {
            let m = modulus_identities_check(&s0, &s1, t).unwrap();
            assert!((m.lhs - (2.0 - (-t).exp())).abs() < 1e-8);
            assert!((m.lhs - m.rhs).abs() < 1e-8 * m.rhs);
            assert!((m.product - 1.0).abs() < 1e-8);
        }
        assert!(s1.max_modulus_deviation() < 1e-7);
    }

    #[test]
    fn companion_sides_are_not_swapped() {
        // Noncommuting coefficients make φ and ψ differ; both must still obey their modulus identities.
        let set = CoeffSet::new(
            0.0,
            CoeffFn::constant(Quaternion::new(0.3, 0.2, 0.0, 0.1)),
            CoeffFn::constant(Quaternion::new(0.0, 0.0, 0.4, 0.0)),
            CoeffFn::constant(Quaternion::new(0.1, 0.0, 0.0, -0.3)),
            CoeffFn::constant(Quaternion::new(0.0, 0.2, 0.0, 0.0)),
        );
        let eq = RiccatiEq::new(set);
        let q1 = Quaternion::new(0.2, -0.1, 0.3, 0.05);
        let sol = solve_with_companions(&eq, 0.0, q1, 3.0).unwrap();
        assert!(sol.max_modulus_deviation() < 1e-8);
        let lambda = Quaternion::new(0.1, 0.05, -0.07, 0.02);
        let direct = solve_with_companions(&eq, 0.0, q1 + lambda, 3.0).unwrap();
        for t in [0.5, 1.5, 3.0] {
            let f = family_member(&sol, lambda, t).unwrap();
            assert!(f.max_abs_diff(&direct.q(t).unwrap()) < 1e-8, "t={t}");
        }
    }

    #[test]
    fn anchor_and_domain_are_validated() {
        let eq = RiccatiEq::new(CoeffSet::new(1.0, CoeffFn::zero(), CoeffFn::zero(), CoeffFn::zero(), CoeffFn::zero()));
        assert!(matches!(
            solve_with_companions(&eq, 0.0, Quaternion::ZERO, 2.0),
            Err(RiccatiError::BeforeStart { .. })
        ));
        let table = CoeffFn::table(vec![0.0, 1.0, 2.0], vec![Quaternion::ONE; 3], crate::coeffs::Interp::Linear).unwrap();
        let eq = scalar_a(table);
        assert!(matches!(
            solve_with_companions(&eq, 0.0, Quaternion::ZERO, 3.0),
            Err(RiccatiError::BeyondDomain { .. })
        ));
    }
}
