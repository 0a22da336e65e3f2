//! Evidence-based normal/extremal classification of seeds and of the equation.

use serde::{Deserialize, Serialize};

use super::tail::{nu_tail_with, TailParams, TailStatus};
use super::{family_member, solve_with_options, RiccatiEq, RiccatiError, RiccatiPath, RiccatiSolution, SolveOptions};
use crate::ode::Status;
use crate::quat::Quaternion;

/// Relative growth of `sup|μ|` over the last tenth of the horizon still counted as a plateau.
pub const PLATEAU_TOL: f64 = 1e-3;
/// `|μ|` level taken as evidence of unbounded growth.
pub const MU_EXTREMAL: f64 = 1e6;
const TREND_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub solve: SolveOptions,
    pub plateau_tol: f64,
    pub mu_extremal: f64,
    pub tail: TailParams,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            plateau_tol: PLATEAU_TOL,
            mu_extremal: MU_EXTREMAL,
            tail: TailParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedVerdict {
    NormalEvidence,
    ExtremalCandidate,
    Escaped,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationVerdict {
    Normal,
    Extremal,
    SubExtremalEvidence,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSummary {
    pub status: TailStatus,
    pub value: Quaternion,
    pub zero_count: usize,
    pub first_zero: Option<f64>,
    pub last_zero: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: Quaternion,
    pub verdict: SeedVerdict,
    pub status: Status,
    pub t_last: f64,
    pub sup_mu: f64,
    /// `sup|μ|` over the first 90% of the covered interval.
    pub sup_mu_early: f64,
    /// First time `|μ|` reached the extremal level.
    pub mu_crossing: Option<f64>,
    /// The escape, if any, has the shape of a finite-time pole.
    pub pole: bool,
    pub nu: Option<NuSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub t1: f64,
    pub horizon: f64,
    pub seeds: Vec<SeedReport>,
    pub verdict: EquationVerdict,
}

pub fn classify(eq: &RiccatiEq, t1: f64, seeds: &[Quaternion], horizon: f64) -> Result<ClassificationReport, RiccatiError> {
    classify_with(eq, t1, seeds, horizon, &ClassifyOptions::default())
}

pub fn classify_with(
    eq: &RiccatiEq,
    t1: f64,
    seeds: &[Quaternion],
    horizon: f64,
    opts: &ClassifyOptions,
) -> Result<ClassificationReport, RiccatiError> {
    let reports = seeds
        .iter()
        .map(|&seed| {
            let sol = solve_with_options(eq, t1, seed, horizon, &opts.solve)?;
            seed_report(&sol, opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = equation_verdict(&reports);
    Ok(ClassificationReport { t1, horizon, seeds: reports, verdict })
}

/// Per-seed decision table applied to an already integrated solution.
pub fn seed_report(sol: &RiccatiSolution, opts: &ClassifyOptions) -> Result<SeedReport, RiccatiError> {
    let t1 = sol.t1();
    let t_last = sol.t_last();
    let cutoff = t1 + 0.9 * (t_last - t1);
    let mut sup_mu = 0.0f64;
    let mut sup_mu_early = 0.0f64;
    let mut mu_crossing = None;
    for (k, &t) in sol.times().iter().enumerate() {
        let m = sol.state_at_step(k).mu.norm();
        sup_mu = sup_mu.max(m);
        if t <= cutoff {
            sup_mu_early = sup_mu_early.max(m);
        }
        if mu_crossing.is_none() && m >= opts.mu_extremal {
            mu_crossing = Some(t);
        }
    }
    let growing = match mu_crossing {
        Some(tc) => monotone_mu(sol, tc)?,
        None => false,
    };
    let nu = if sol.is_regular() {
        let tail = nu_tail_with(sol, t1, t_last, &opts.tail)?;
        Some(NuSummary {
            status: tail.status,
            value: tail.value,
            zero_count: tail.zeros.len(),
            first_zero: tail.zeros.first().copied(),
            last_zero: tail.zeros.last().copied(),
        })
    } else {
        None
    };
    let plateau = sup_mu == 0.0 || (sup_mu - sup_mu_early) / sup_mu < opts.plateau_tol;
    let pole = sol.escape_is_pole();
    let verdict = if growing && !pole {
        SeedVerdict::ExtremalCandidate
    } else {
        match sol.status() {
            Status::Escaped { .. } if pole => SeedVerdict::Escaped,
            Status::Escaped { .. } => SeedVerdict::Indeterminate,
            Status::StiffnessFailure { .. } => SeedVerdict::Indeterminate,
            Status::ReachedEnd if plateau => SeedVerdict::NormalEvidence,
            Status::ReachedEnd => SeedVerdict::Indeterminate,
        }
    };
    Ok(SeedReport {
        seed: sol.q1(),
        verdict,
        status: sol.status(),
        t_last,
        sup_mu,
        sup_mu_early,
        mu_crossing,
        pole,
        nu,
    })
}

/// `|μ|` nondecreasing over the second half of `[t1, tc]`.
fn monotone_mu(sol: &RiccatiSolution, tc: f64) -> Result<bool, RiccatiError> {
    let t1 = sol.t1();
    let samples: Vec<f64> = (TREND_SAMPLES / 2..=TREND_SAMPLES)
        .map(|i| sol.mu(t1 + (tc - t1) * i as f64 / TREND_SAMPLES as f64).map(|m| m.norm()))
        .collect::<Result<_, _>>()?;
    Ok(samples.windows(2).all(|w| w[1] >= w[0]))
}

/// Equation-level aggregation.
///
/// Extremal: a seed shows unbounded `μ`, or a regular seed has a convergent, nowhere
/// vanishing tail (so `q − ν⁻¹` is an extremal solution). Normal: every regular seed
/// plateaus. Sub-extremal evidence: plateauing seeds coexist with undecided seeds whose
/// tail does not converge.
pub fn equation_verdict(seeds: &[SeedReport]) -> EquationVerdict {
    let nu_extremal = |s: &SeedReport| {
        s.nu.as_ref().is_some_and(|n| n.status.is_converged() && n.zero_count == 0)
    };
    if seeds.iter().any(|s| s.verdict == SeedVerdict::ExtremalCandidate || nu_extremal(s)) {
        return EquationVerdict::Extremal;
    }
    let regular: Vec<&SeedReport> = seeds.iter().filter(|s| s.status == Status::ReachedEnd).collect();
    if !regular.is_empty() && regular.iter().all(|s| s.verdict == SeedVerdict::NormalEvidence) {
        return EquationVerdict::Normal;
    }
    let any_normal = regular.iter().any(|s| s.verdict == SeedVerdict::NormalEvidence);
    let undecided_tail = regular
        .iter()
        .any(|s| s.verdict == SeedVerdict::Indeterminate && s.nu.as_ref().is_some_and(|n| !n.status.is_converged()));
    if any_normal && undecided_tail {
        return EquationVerdict::SubExtremalEvidence;
    }
    EquationVerdict::Indeterminate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub gamma: f64,
    pub seed: Quaternion,
    pub regular: bool,
    /// Largest relative gap between the direct integration and the family formula.
    pub max_family_deviation: f64,
}

/// For a regular solution, the seed `q(t1) − γ⁻¹` with `γ > 2 sup|μ|` must also be regular.
pub fn theorem31_witness(sol: &RiccatiSolution, opts: &SolveOptions) -> Result<WitnessReport, RiccatiError> {
    let sup = (0..sol.times().len()).map(|k| sol.state_at_step(k).mu.norm()).fold(0.0, f64::max);
    let gamma = 2.0 * sup + 1.0;
    let lambda = Quaternion::real(-1.0 / gamma);
    let seed = sol.q1() + lambda;
    let direct = solve_with_options(sol.equation(), sol.t1(), seed, sol.t_last(), opts)?;
    let regular = direct.is_regular();
    let mut dev = 0.0f64;
    let (lo, hi) = (sol.t1(), direct.t_last());
    for i in 0..=100 {
        let t = lo + (hi - lo) * i as f64 / 100.0;
        let f = family_member(sol, lambda, t)?;
        dev = dev.max((f - direct.q(t)?).norm() / f.norm().max(1.0));
    }
    Ok(WitnessReport { gamma, seed, regular, max_family_deviation: dev })
}
