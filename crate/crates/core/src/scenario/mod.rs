//! Scenario files: schema, builtin catalog and the runner that turns them into reports and CSVs.

mod checks;
mod output;
mod run;

pub use output::{format_number, write_atomic};
pub use run::{run, CheckResult, RunReport, SeedSummary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{schema_error, CoeffError, CoeffFn, CoeffSet};
use crate::linear_system::{Conclusion, LinearSystem, PTable};
use crate::ode;
use crate::quat::Quaternion;
use crate::riccati::{EquationVerdict, SeedVerdict, SolveOptions, DEFAULT_HORIZON};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unknown builtin `{0}` (see `qr list-builtins`)")]
    UnknownBuiltin(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Schema { path: path.into(), message: message.into() }
    }

}

impl From<CoeffError> for ScenarioError {
    fn from(e: CoeffError) -> Self {
        match e {
            CoeffError::Schema { path, message } => ScenarioError::Schema { path, message },
            other => ScenarioError::schema("", other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Riccati,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTolerances {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_escape")]
    pub escape_norm: f64,
}

fn default_rtol() -> f64 {
    ode::DEFAULT_RTOL
}
fn default_atol() -> f64 {
    ode::DEFAULT_ATOL
}
fn default_escape() -> f64 {
    ode::DEFAULT_ESCAPE_NORM
}
fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

impl Default for ScenarioTolerances {
    fn default() -> Self {
        Self { rtol: default_rtol(), atol: default_atol(), escape_norm: default_escape() }
    }
}

impl ScenarioTolerances {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: ode::Tolerances::new(self.rtol, self.atol), escape_norm: self.escape_norm }
    }
}

/// Coarse tail status used in expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Converged,
    DivergesToInfinity,
    Oscillatory,
}

/// Index set `𝔖`: an explicit list or `"try-all"` over the fifteen nonempty subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexSet {
    List(Vec<usize>),
    Keyword(String),
}

impl IndexSet {
    pub fn subsets(&self) -> Result<Vec<Vec<usize>>, String> {
        match self {
            IndexSet::List(v) => Ok(vec![v.clone()]),
            IndexSet::Keyword(k) if k == "try-all" => {
                Ok((1u8..16).map(|mask| (0..4).filter(|n| mask & (1 << n) != 0).collect()).collect())
            }
            IndexSet::Keyword(k) => Err(format!("expected a list of indices or \"try-all\", got \"{k}\"")),
        }
    }
}

fn tol_1e6() -> f64 {
    1e-6
}
fn tol_1e7() -> f64 {
    1e-7
}
fn tol_1e8() -> f64 {
    1e-8
}
fn tol_1e3() -> f64 {
    1e-3
}
fn ten() -> f64 {
    10.0
}
fn tenth() -> f64 {
    0.1
}

/// A requested check. Thresholds default to the documented acceptance tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// `|φ_q| = exp ∫Re[aq+c]` and `|ψ_q| = exp ∫Re[aq+b]` along every seed.
    Moduli {
        #[serde(default = "tol_1e7")]
        tol: f64,
    },
    /// Cross-modulus identity and product of the two cross moduli for every pair of seeds.
    CrossModuli {
        #[serde(default = "tol_1e6")]
        tol: f64,
    },
    /// Comparison with the 4×4 real matrix Riccati equation of symbols.
    MatrixOracle {
        #[serde(default = "tol_1e6")]
        tol: f64,
        /// Right end of the comparison (defaults to `min(horizon, t1 + 10)`).
        #[serde(default)]
        t_end: Option<f64>,
        /// Integration tolerance for both sides (defaults to the scenario's).
        #[serde(default)]
        rtol: Option<f64>,
    },
    /// `q = (1 + λ∫a)⁻¹λ` for `b = c = d = 0` with `λ` the seed, on `[t1, t1 + span]`.
    ClosedForm {
        #[serde(default = "tol_1e6")]
        tol: f64,
        #[serde(default = "ten")]
        span: f64,
        /// Points with `|1 + λ∫a|` below this are outside the regular span.
        #[serde(default = "tenth")]
        margin: f64,
    },
    EscapeTime {
        seed: usize,
        expect: f64,
        tol: f64,
    },
    Classification {
        #[serde(default)]
        expect_verdict: Option<EquationVerdict>,
        #[serde(default)]
        forbid_verdict: Option<EquationVerdict>,
        /// Expected per-seed verdicts; `null` entries are not checked.
        #[serde(default)]
        expect_seeds: Option<Vec<Option<SeedVerdict>>>,
    },
    NuTail {
        seed: usize,
        #[serde(default)]
        expect_status: Option<TailKind>,
        #[serde(default)]
        expect_value: Option<Quaternion>,
        #[serde(default)]
        expect_zeros: Option<bool>,
        #[serde(default = "tol_1e6")]
        tol: f64,
    },
    /// `q* = q₀ − ν⁻¹` from a seed and, optionally, its agreement with a known path.
    Extremal {
        seed: usize,
        #[serde(default)]
        expect_q1: Option<Quaternion>,
        #[serde(default = "tol_1e6")]
        tol: f64,
        #[serde(default)]
        track: Option<CoeffFn>,
        #[serde(default = "ten")]
        track_until: f64,
        #[serde(default = "tol_1e6")]
        track_tol: f64,
    },
    /// `∫Re[a(q* − q_N)]` from the extremal built on `extremal_seed` against `other_seed` falls below `−ln H`.
    ExtremalDominance {
        extremal_seed: usize,
        other_seed: usize,
        horizons: Vec<f64>,
    },
    /// A known exact solution `q(t)` with derivative `dq(t)`; optional companions.
    ExactPath {
        q: CoeffFn,
        dq: CoeffFn,
        #[serde(default)]
        phi: Option<CoeffFn>,
        #[serde(default)]
        psi: Option<CoeffFn>,
        #[serde(default = "ten")]
        until: f64,
        #[serde(default = "tol_1e8")]
        tol: f64,
    },
    /// Every regular seed has a regular neighbour through `q(t1) − γ⁻¹`.
    Witness {
        #[serde(default = "tol_1e6")]
        tol: f64,
    },
    /// Lift every seed to a system pair, project back and check the modulus formula and residual.
    Bridge {
        #[serde(default = "tol_1e8")]
        tol: f64,
        #[serde(default = "tol_1e6")]
        modulus_tol: f64,
        #[serde(default = "tol_1e7")]
        residual_tol: f64,
    },
    /// Right multipliers must preserve solutions; left multipliers are expected to break them.
    Multipliers {
        #[serde(default)]
        right: Vec<Quaternion>,
        #[serde(default)]
        left: Vec<Quaternion>,
        #[serde(default = "tol_1e7")]
        residual_tol: f64,
        #[serde(default = "tenth")]
        left_min: f64,
    },
    Thm42 {
        s: IndexSet,
        #[serde(default)]
        variant: PTable,
        #[serde(default)]
        expect: Option<Conclusion>,
    },
    /// Principal solution from the extremal of `seed` against the direct `pairs`.
    Principal {
        seed: usize,
        #[serde(default)]
        tail_horizon: Option<f64>,
        #[serde(default = "tol_1e3")]
        final_ratio: f64,
        #[serde(default = "tol_1e3")]
        drift: f64,
    },
    SignCheck {
        s: Vec<usize>,
    },
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Moduli { .. } => "moduli",
            Check::CrossModuli { .. } => "cross_moduli",
            Check::MatrixOracle { .. } => "matrix_oracle",
            Check::ClosedForm { .. } => "closed_form",
            Check::EscapeTime { .. } => "escape_time",
            Check::Classification { .. } => "classification",
            Check::NuTail { .. } => "nu_tail",
            Check::Extremal { .. } => "extremal",
            Check::ExtremalDominance { .. } => "extremal_dominance",
            Check::ExactPath { .. } => "exact_path",
            Check::Witness { .. } => "witness",
            Check::Bridge { .. } => "bridge",
            Check::Multipliers { .. } => "multipliers",
            Check::Thm42 { .. } => "thm42",
            Check::Principal { .. } => "principal",
            Check::SignCheck { .. } => "sign_check",
        }
    }

    fn system_only(&self) -> bool {
        matches!(
            self,
            Check::Bridge { .. } | Check::Multipliers { .. } | Check::Thm42 { .. } | Check::Principal { .. } | Check::SignCheck { .. }
        )
    }

    fn seed_refs(&self) -> Vec<usize> {
        match self {
            Check::EscapeTime { seed, .. } | Check::NuTail { seed, .. } | Check::Extremal { seed, .. } | Check::Principal { seed, .. } => {
                vec![*seed]
            }
            Check::ExtremalDominance { extremal_seed, other_seed, .. } => vec![*extremal_seed, *other_seed],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Free text; builtins name what they reproduce.
    #[serde(default)]
    pub description: String,
    pub mode: Mode,
    #[serde(default)]
    pub coeffs: Option<CoeffSet>,
    #[serde(default)]
    pub system: Option<LinearSystem>,
    pub seeds: Vec<Quaternion>,
    /// Initial pairs `[φ(t1), ψ(t1)]` integrated directly (system mode).
    #[serde(default)]
    pub pairs: Vec<[Quaternion; 2]>,
    /// Defaults to the left endpoint `t0`.
    #[serde(default)]
    pub t1: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub tolerances: ScenarioTolerances,
    #[serde(default)]
    pub checks: Vec<Check>,
}

/// Command-line overrides applied on top of a parsed scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub horizon: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::from(schema_error(e)))?;
        if let Some(c) = sc.coeffs.as_mut() {
            c.prepare("coeffs")?;
        }
        if let Some(s) = sc.system.as_mut() {
            s.prepare("system")?;
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios always serialize")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ScenarioError> {
        if let Some(h) = o.horizon {
            self.horizon = h;
        }
        if let Some(r) = o.rtol {
            self.tolerances.rtol = r;
        }
        if let Some(a) = o.atol {
            self.tolerances.atol = a;
        }
        self.validate()
    }

    pub fn t0(&self) -> f64 {
        match self.mode {
            Mode::Riccati => self.coeffs.as_ref().map_or(0.0, |c| c.t0),
            Mode::System => self.system.as_ref().map_or(0.0, |s| s.t0),
        }
    }

    pub fn t1(&self) -> f64 {
        self.t1.unwrap_or_else(|| self.t0())
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(ScenarioError::schema("name", "must be a nonempty file-name-safe string"));
        }
        match self.mode {
            Mode::Riccati if self.coeffs.is_none() => return Err(ScenarioError::schema("coeffs", "required in riccati mode")),
            Mode::Riccati if self.system.is_some() => return Err(ScenarioError::schema("system", "not allowed in riccati mode")),
            Mode::System if self.system.is_none() => return Err(ScenarioError::schema("system", "required in system mode")),
            Mode::System if self.coeffs.is_some() => return Err(ScenarioError::schema("coeffs", "not allowed in system mode")),
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(ScenarioError::schema("seeds", "at least one seed is required"));
        }
        if self.seeds.iter().any(|q| !q.is_finite()) {
            return Err(ScenarioError::schema("seeds", "seeds must be finite"));
        }
        if self.t1() < self.t0() {
            return Err(ScenarioError::schema("t1", format!("t1 = {} precedes t0 = {}", self.t1(), self.t0())));
        }
        if !(self.horizon > self.t1()) || !self.horizon.is_finite() {
            return Err(ScenarioError::schema("horizon", format!("horizon {} must be finite and exceed t1 = {}", self.horizon, self.t1())));
        }
        let t = &self.tolerances;
        if !(t.rtol > 0.0 && t.atol > 0.0 && t.escape_norm > 0.0) {
            return Err(ScenarioError::schema("tolerances", "rtol, atol and escape_norm must be positive"));
        }
        if !self.pairs.is_empty() && self.mode != Mode::System {
            return Err(ScenarioError::schema("pairs", "only valid in system mode"));
        }
        for (i, c) in self.checks.iter().enumerate() {
            let path = format!("checks[{i}]");
            if c.system_only() && self.mode != Mode::System {
                return Err(ScenarioError::schema(path, format!("check `{}` requires mode = system", c.name())));
            }
            if let Some(&s) = c.seed_refs().iter().find(|&&s| s >= self.seeds.len()) {
                return Err(ScenarioError::schema(path, format!("seed index {s} out of range ({} seeds)", self.seeds.len())));
            }
            match c {
                Check::Principal { .. } if self.pairs.len() < 2 => {
                    return Err(ScenarioError::schema(path, "principal needs at least two `pairs`"));
                }
                Check::Thm42 { s, .. } => {
                    s.subsets().map_err(|m| ScenarioError::schema(format!("{path}.s"), m))?;
                }
                Check::ClosedForm { .. } => {
                    let cs = self.coeffs.as_ref().expect("riccati mode checked above");
                    if !(cs.b.is_zero() && cs.c.is_zero() && cs.d.is_zero()) {
                        return Err(ScenarioError::schema(path, "closed_form requires b = c = d = 0"));
                    }
                }
                _ => {}
            }
        }
        let mut names: Vec<&str> = self.checks.iter().map(Check::name).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(ScenarioError::schema("checks", format!("check `{}` requested more than once", w[0])));
        }
        Ok(())
    }
}

pub struct Builtin {
    pub name: &'static str,
    pub reproduces: &'static str,
    pub text: &'static str,
}

pub const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "example-3.1-exp",
        reproduces: "Example 3.1 with a(t) = e^{-t}: extremal seed -1, escape below -1",
        text: include_str!("../../builtins/example-3.1-exp.json"),
    },
    Builtin {
        name: "example-3.1-bump",
        reproduces: "Example 3.1 with a bounded-support coefficient: no 0-extremal solution",
        text: include_str!("../../builtins/example-3.1-bump.json"),
    },
    Builtin {
        name: "example-3.1-const",
        reproduces: "Example 3.1 closed form (1 + λ∫a)^{-1}λ with a = 1",
        text: include_str!("../../builtins/example-3.1-const.json"),
    },
    Builtin {
        name: "example-3.3-lambda",
        reproduces: "Example 3.3 with α = β = 0, a = 1, λ(t) = i e^{-t}",
        text: include_str!("../../builtins/example-3.3-lambda.json"),
    },
    Builtin {
        name: "example-3.4",
        reproduces: "Example 3.4, q' + q (t cos t) q = 0: sub-extremal, not extremal",
        text: include_str!("../../builtins/example-3.4.json"),
    },
    Builtin {
        name: "remark-4.3",
        reproduces: "Remark 4.3: right multipliers preserve system solutions, left ones do not",
        text: include_str!("../../builtins/remark-4.3.json"),
    },
    Builtin {
        name: "thm-4.2-real-extremal",
        reproduces: "Theorem 4.2 and Remark 4.1 with a12 = e^{-2t}: principal and non-principal solutions",
        text: include_str!("../../builtins/thm-4.2-real-extremal.json"),
    },
];

pub fn builtin(name: &str) -> Result<&'static Builtin, ScenarioError> {
    BUILTINS.iter().find(|b| b.name == name).ok_or_else(|| ScenarioError::UnknownBuiltin(name.to_string()))
}

/// Reads and parses a scenario file, or else loads a builtin of that name.
pub fn load(source: &str) -> Result<Scenario, ScenarioError> {
    let path = std::path::Path::new(source);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io { path: source.to_string(), source: e })?;
        return Scenario::parse(&text);
    }
    match builtin(source) {
        Ok(b) => Scenario::parse(b.text),
        Err(_) => Err(ScenarioError::Io {
            path: source.to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or builtin scenario"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses_and_is_named_after_itself() {
        for b in BUILTINS {
            let sc = Scenario::parse(b.text).unwrap_or_else(|e| panic!("{}: {e}", b.name));
            assert_eq!(sc.name, b.name);
            let again = Scenario::parse(&sc.to_json()).unwrap();
            assert_eq!(again, sc);
        }
    }

    #[test]
    fn schema_errors_carry_paths() {
        let bad = r#"{"name":"x","mode":"riccati","coeffs":{"t0":0,"a":{"const":[1,0,0]}},"seeds":[[0,0,0,0]]}"#;
        match Scenario::parse(bad) {
            Err(ScenarioError::Schema { path, .. }) => assert!(path.starts_with("coeffs.a"), "{path}"),
            other => panic!("{other:?}"),
        }
        let wrong_mode = r#"{"name":"x","mode":"riccati","coeffs":{"t0":0},"seeds":[[0,0,0,0]],"checks":[{"kind":"bridge"}]}"#;
        assert!(matches!(Scenario::parse(wrong_mode), Err(ScenarioError::Schema { .. })));
        let unknown = r#"{"name":"x","mode":"riccati","coeffs":{"t0":0},"seeds":[[0,0,0,0]],"checks":[{"kind":"moduli","tolerance":1}]}"#;
        assert!(matches!(Scenario::parse(unknown), Err(ScenarioError::Schema { .. })));
        let seed_ref = r#"{"name":"x","mode":"riccati","coeffs":{"t0":0},"seeds":[[0,0,0,0]],"checks":[{"kind":"nu_tail","seed":3}]}"#;
        assert!(matches!(Scenario::parse(seed_ref), Err(ScenarioError::Schema { .. })));
    }

    #[test]
    fn try_all_expands_to_fifteen_subsets() {
        let s: IndexSet = serde_json::from_str("\"try-all\"").unwrap();
        let all = s.subsets().unwrap();
        assert_eq!(all.len(), 15);
        assert!(all.contains(&vec![0, 1, 2, 3]));
        assert!(IndexSet::Keyword("some".into()).subsets().is_err());
    }
}
