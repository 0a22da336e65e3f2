//! Sign/discriminant and integrability hypotheses for the normal-or-extremal alternative.

use serde::{Deserialize, Serialize};

use super::{to_riccati, windowed, LinearError, LinearSystem, TailIntegral};
use crate::ode::{self, OdeError, OdeProblem, Tolerances};
use crate::quat::Quaternion;
use crate::riccati::{solve_with_companions, TailParams, TailStatus};

/// Samples of the sign conditions.
pub const ALPHA_GRID: usize = 2000;
/// Weak-inequality slack: values within this of the boundary satisfy the condition.
pub const WEAK_TOL: f64 = 1e-10;
const REPORTED_SAMPLES: usize = 20;

/// Which `p_{nm}` table drives the conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PTable {
    /// As printed: `p_{0m} = b_m + c_m`, `p_{11} = b_1 + c_1`, `p_{22} = b_2 + c_2`, all other entries `b_m − c_m`.
    #[default]
    Verbatim,
    /// `p_{nm} = b_m + c_m` when `m = n` (and for `n = 0`), else `b_m − c_m`.
    Symmetrized,
}

/// `p[n][m − 1]` for `n = 0..3`, `m = 1..3`.
pub fn p_table(b: Quaternion, c: Quaternion, variant: PTable) -> [[f64; 3]; 4] {
    let mut p = [[0.0; 3]; 4];
    for (n, row) in p.iter_mut().enumerate() {
        for m in 1..=3 {
            let plus = match variant {
                PTable::Verbatim => n == 0 || (n == m && n != 3),
                PTable::Symmetrized => n == 0 || n == m,
            };
            let (bm, cm) = (b.component(m), c.component(m));
            row[m - 1] = if plus { bm + cm } else { bm - cm };
        }
    }
    p
}

/// `D_0 = Σ p_{0m}² + 4 a_0 d_0` (or `4 d_0` when `a_0 = 0`), `D_n = Σ p_{nm}² − 4 a_n d_n` (or `−4 d_n`).
pub fn d_values(a: Quaternion, d: Quaternion, p: &[[f64; 3]; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for n in 0..4 {
        let (an, dn) = (a.component(n), d.component(n));
        let sign = if n == 0 { 1.0 } else { -1.0 };
        out[n] = if an.abs() <= WEAK_TOL {
            sign * 4.0 * dn
        } else {
            p[n].iter().map(|x| x * x).sum::<f64>() + sign * 4.0 * an * dn
        };
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm42Sample {
    pub t: f64,
    pub a: Quaternion,
    pub p_verbatim: [[f64; 3]; 4],
    pub p_symmetrized: [[f64; 3]; 4],
    pub d_verbatim: [f64; 4],
    pub d_symmetrized: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub conditions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    pub holds: bool,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    NormalOrExtremal,
    HypothesesFail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm42Report {
    pub s_set: Vec<usize>,
    pub d_set: Vec<usize>,
    pub variant: PTable,
    pub samples: Vec<Thm42Sample>,
    pub alpha_verbatim: Alpha,
    pub alpha_symmetrized: Alpha,
    pub beta: TailIntegral,
    pub conclusion: Conclusion,
    /// Names of the failed hypotheses (`alpha`, `beta`).
    pub failed: Vec<String>,
}

struct Ident {
    a: Quaternion,
    b: Quaternion,
    c: Quaternion,
    d: Quaternion,
}

fn ident(sys: &LinearSystem, t: f64) -> Result<Ident, LinearError> {
    let [a11, a12, a21, a22] = sys.eval(t)?;
    Ok(Ident { a: a12, b: -a22, c: a11, d: -a21 })
}

fn violations(sys: &LinearSystem, t: f64, s: &[usize], variant: PTable) -> Result<Vec<String>, LinearError> {
    let id = ident(sys, t)?;
    let p = p_table(id.b, id.c, variant);
    let dv = d_values(id.a, id.d, &p);
    let mut out = Vec::new();
    for n in 0..4 {
        let an = id.a.component(n);
        if s.contains(&n) {
            if an < -WEAK_TOL {
                out.push(format!("a_{n} >= 0"));
            }
            if an.abs() <= WEAK_TOL {
                for &m in s.iter().filter(|&&m| m >= 1) {
                    if p[n][m - 1].abs() > WEAK_TOL {
                        out.push(format!("p_{n}{m} = 0 where a_{n} = 0"));
                    }
                }
            }
        } else if an.abs() > WEAK_TOL {
            out.push(format!("a_{n} == 0"));
        }
        if dv[n] > WEAK_TOL {
            out.push(format!("D_{n} <= 0"));
        }
    }
    Ok(out)
}

fn alpha(sys: &LinearSystem, t0: f64, horizon: f64, s: &[usize], variant: PTable) -> Result<Alpha, LinearError> {
    let grid: Vec<f64> = (0..=ALPHA_GRID).map(|i| t0 + (horizon - t0) * i as f64 / ALPHA_GRID as f64).collect();
    for (i, &t) in grid.iter().enumerate() {
        let v = violations(sys, t, s, variant)?;
        if v.is_empty() {
            continue;
        }
        if i == 0 {
            return Ok(Alpha { holds: false, first_violation: Some(Violation { t, conditions: v }) });
        }
        let (mut lo, mut hi) = (grid[i - 1], t);
        let mut found = v;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let vm = violations(sys, mid, s, variant)?;
            if vm.is_empty() {
                lo = mid;
            } else {
                hi = mid;
                found = vm;
            }
        }
        return Ok(Alpha { holds: false, first_violation: Some(Violation { t: hi, conditions: found }) });
    }
    Ok(Alpha { holds: true, first_violation: None })
}

/// `∫_{t0}^H |a12(τ)| exp ∫_{t0}^τ (Re a22 − Re a11)` with tail diagnosis.
pub fn beta_integral(sys: &LinearSystem, horizon: f64) -> Result<TailIntegral, LinearError> {
    let problem = OdeProblem::new(1, sys.t0, vec![0.0; 4], |t, y, dy| {
        let [a11, a12, _, a22] = sys.eval(t).map_err(|e| OdeError::rhs(t, e))?;
        dy.fill(0.0);
        dy[0] = a22.re() - a11.re();
        dy[1] = a12.norm() * y[0].exp();
        Ok(())
    })
    .with_escape_norm(f64::INFINITY);
    let traj = ode::solve(&problem, horizon, Tolerances::default(), &[])?;
    let hi = traj.t_last();
    let integrand = |t: f64| -> [f64; 1] {
        let v = || -> Result<f64, LinearError> { Ok(sys.a12.eval(t)?.norm() * traj.query(t)?[0].exp()) };
        [v().unwrap_or(f64::NAN)]
    };
    let (status, value) = windowed(traj.times(), sys.t0, hi, integrand, &TailParams::default())?;
    Ok(TailIntegral { status, value })
}

fn index_sets(s: &[usize]) -> Result<(Vec<usize>, Vec<usize>), LinearError> {
    let mut s_set: Vec<usize> = s.to_vec();
    s_set.sort_unstable();
    s_set.dedup();
    if s_set.is_empty() || s_set.iter().any(|&n| n > 3) {
        return Err(LinearError::InvalidIndexSet(s.to_vec()));
    }
    let d_set = (0..4).filter(|n| !s_set.contains(n)).collect();
    Ok((s_set, d_set))
}

pub fn thm42_check(sys: &LinearSystem, s: &[usize], horizon: f64) -> Result<Thm42Report, LinearError> {
    thm42_check_with(sys, s, horizon, PTable::Verbatim)
}

pub fn thm42_check_with(sys: &LinearSystem, s: &[usize], horizon: f64, variant: PTable) -> Result<Thm42Report, LinearError> {
    let (s_set, d_set) = index_sets(s)?;
    if !(horizon > sys.t0) {
        return Err(LinearError::InvalidInput(format!("horizon {horizon} must exceed t0 = {}", sys.t0)));
    }
    let samples = (0..=REPORTED_SAMPLES)
        .map(|i| {
            let t = sys.t0 + (horizon - sys.t0) * i as f64 / REPORTED_SAMPLES as f64;
            let id = ident(sys, t)?;
            let pv = p_table(id.b, id.c, PTable::Verbatim);
            let ps = p_table(id.b, id.c, PTable::Symmetrized);
            Ok(Thm42Sample {
                t,
                a: id.a,
                d_verbatim: d_values(id.a, id.d, &pv),
                d_symmetrized: d_values(id.a, id.d, &ps),
                p_verbatim: pv,
                p_symmetrized: ps,
            })
        })
        .collect::<Result<Vec<_>, LinearError>>()?;
    let alpha_verbatim = alpha(sys, sys.t0, horizon, &s_set, PTable::Verbatim)?;
    let alpha_symmetrized = alpha(sys, sys.t0, horizon, &s_set, PTable::Symmetrized)?;
    let beta = beta_integral(sys, horizon)?;
    let chosen = match variant {
        PTable::Verbatim => &alpha_verbatim,
        PTable::Symmetrized => &alpha_symmetrized,
    };
    let mut failed = Vec::new();
    if !chosen.holds {
        failed.push("alpha".to_string());
    }
    if !matches!(beta.status, TailStatus::Converged { .. }) {
        failed.push("beta".to_string());
    }
    let conclusion = if failed.is_empty() { Conclusion::NormalOrExtremal } else { Conclusion::HypothesesFail };
    Ok(Thm42Report { s_set, d_set, variant, samples, alpha_verbatim, alpha_symmetrized, beta, conclusion, failed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCheck {
    pub regular: bool,
    pub holds: bool,
    /// Smallest signed component margin over the steps (negative means violated).
    pub min_margin: f64,
    pub first_violation: Option<f64>,
}

/// Solves the Riccati form from `q(t0) = 0` and checks the sign pattern of
/// `q = 𝔮₀ − i𝔮₁ − j𝔮₂ − k𝔮₃`: `𝔮_n ≥ 0` for `n ∈ S`.
pub fn thm43_sign_check(sys: &LinearSystem, s: &[usize], horizon: f64) -> Result<SignCheck, LinearError> {
    let (s_set, _) = index_sets(s)?;
    let sol = solve_with_companions(&to_riccati(sys), sys.t0, Quaternion::ZERO, horizon)?;
    let mut min_margin = f64::INFINITY;
    let mut first_violation = None;
    for (k, &t) in sol.times().iter().enumerate() {
        let q = sol.state_at_step(k).q;
        for &n in &s_set {
            let v = if n == 0 { q.q0 } else { -q.component(n) };
            min_margin = min_margin.min(v);
            if v < -WEAK_TOL && first_violation.is_none() {
                first_violation = Some(t);
            }
        }
    }
    Ok(SignCheck { regular: sol.is_regular(), holds: first_violation.is_none(), min_margin, first_violation })
}
