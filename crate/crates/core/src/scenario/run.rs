use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::checks::{run_check, Context, Outcome};
use super::output::{write_atomic, Table};
use super::{Mode, Scenario, ScenarioError, ScenarioTolerances};
use crate::linear_system::to_riccati;
use crate::ode::Status;
use crate::quat::Quaternion;
use crate::riccati::{solve_with_options, ClassificationReport, RiccatiEq, RiccatiSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub measured: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub index: usize,
    pub seed: Quaternion,
    pub status: Option<Status>,
    pub t_last: Option<f64>,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub t1: f64,
    pub horizon: f64,
    pub tolerances: ScenarioTolerances,
    pub seeds: Vec<SeedSummary>,
    pub checks: Vec<CheckResult>,
    pub classification: Option<ClassificationReport>,
    /// Emitted files, relative to the output directory.
    pub files: Vec<String>,
    pub passed: bool,
}

fn seed_table(sol: &RiccatiSolution) -> Table {
    let n = sol.times().len();
    let states: Vec<_> = (0..n).map(|k| sol.state_at_step(k)).collect();
    let mut t = Table::default();
    t.push_full("t", sol.times().to_vec());
    for c in 0..4 {
        t.push_full(format!("q{c}"), states.iter().map(|s| s.q.component(c)).collect());
    }
    t.push_full("abs_q", states.iter().map(|s| s.q.norm()).collect());
    t.push_full("abs_phi", states.iter().map(|s| s.phi.norm()).collect());
    t.push_full("abs_psi", states.iter().map(|s| s.psi.norm()).collect());
    for c in 0..4 {
        t.push_full(format!("mu{c}"), states.iter().map(|s| s.mu.component(c)).collect());
    }
    t
}

/// Runs every requested check of `sc` and writes CSVs plus `report.json` into `out_dir`.
///
/// Numerical failures are recorded in the report; only i/o problems are returned as errors.
pub fn run(sc: &Scenario, out_dir: &Path) -> Result<RunReport, ScenarioError> {
    let t1 = sc.t1();
    let opts = sc.tolerances.solve_options();
    let (eq, system) = match sc.mode {
        Mode::Riccati => (RiccatiEq::new(sc.coeffs.clone().expect("validated")), None),
        Mode::System => {
            let sys = sc.system.as_ref().expect("validated");
            (to_riccati(sys), Some(sys))
        }
    };

    let solved: Vec<Result<RiccatiSolution, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = sc
            .seeds
            .iter()
            .map(|&seed| {
                let eq = &eq;
                s.spawn(move || solve_with_options(eq, t1, seed, sc.horizon, &opts).map_err(|e| e.to_string()))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed integration panicked")).collect()
    });
    let seeds: Vec<SeedSummary> = solved
        .iter()
        .enumerate()
        .map(|(index, r)| SeedSummary {
            index,
            seed: sc.seeds[index],
            status: r.as_ref().ok().map(|s| s.status()),
            t_last: r.as_ref().ok().map(|s| s.t_last()),
            steps: r.as_ref().map_or(0, |s| s.times().len() - 1),
            error: r.as_ref().err().cloned(),
        })
        .collect();

    let mut files = Vec::new();
    let mut checks = Vec::new();
    let mut classification = None;

    if seeds.iter().any(|s| s.error.is_some()) {
        for c in &sc.checks {
            checks.push(CheckResult {
                check: c.name().to_string(),
                passed: false,
                error: Some("seed integration failed".into()),
                measured: BTreeMap::new(),
            });
        }
    } else {
        let sols: Vec<RiccatiSolution> = solved.into_iter().map(|r| r.expect("checked above")).collect();
        let ctx = Context { sc, eq, system, opts, t1, sols };
        let outcomes: Vec<Result<Outcome, String>> = std::thread::scope(|s| {
            let handles: Vec<_> = sc.checks.iter().map(|c| s.spawn(|| run_check(&ctx, c))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err("check panicked".to_string())))
                .collect()
        });

        let mut tables: Vec<Table> = ctx.sols.iter().map(seed_table).collect();
        for (c, o) in sc.checks.iter().zip(outcomes) {
            match o {
                Ok(mut o) => {
                    for (seed, header, col) in o.columns.drain(..) {
                        tables[seed].push(header, col);
                    }
                    for (name, table) in o.tables.drain(..) {
                        let file = format!("{}-{name}", c.name());
                        write_atomic(&out_dir.join(&file), table.to_csv().as_bytes())?;
                        files.push(file);
                    }
                    if let Some(cl) = o.classification.take() {
                        classification = Some(cl);
                    }
                    checks.push(CheckResult { check: c.name().to_string(), passed: o.passed, error: None, measured: o.measured });
                }
                Err(e) => checks.push(CheckResult {
                    check: c.name().to_string(),
                    passed: false,
                    error: Some(e),
                    measured: BTreeMap::new(),
                }),
            }
        }
        for (i, table) in tables.iter().enumerate() {
            let file = format!("seed-{i}.csv");
            write_atomic(&out_dir.join(&file), table.to_csv().as_bytes())?;
            files.push(file);
        }
    }
    files.sort();

    let passed = seeds.iter().all(|s| s.error.is_none()) && checks.iter().all(|c| c.passed);
    let report = RunReport {
        scenario: sc.name.clone(),
        mode: sc.mode,
        t1,
        horizon: sc.horizon,
        tolerances: sc.tolerances,
        seeds,
        checks,
        classification,
        files,
        passed,
    };
    let json = serde_json::to_string_pretty(&report).expect("reports always serialize");
    write_atomic(&out_dir.join("report.json"), json.as_bytes())?;
    Ok(report)
}
