//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use qriccati::coeffs::{CoeffFn, CoeffSet, ExpSpec, RealFn, TrigFn};
use qriccati::linear_system::{
    asymptotic_ratios, lift, modulus_formula_check, project, residual, solve_system, statement2_integral, thm42_check,
    to_riccati, Conclusion, LinearOptions, LinearSystem, Multiplier,
};
use qriccati::quat::{symbol, Quaternion};
use qriccati::riccati::{
    classify, extremal_solution, nu_tail, solve_with_companions, EquationVerdict, RiccatiEq, RiccatiPath, SeedVerdict,
    TailStatus,
};
use qriccati::scenario::{self, BUILTINS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn random_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    // Magnitudes spread over six decades.
    let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
    Quaternion::new(
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
    )
}

fn scalar_a(a: CoeffFn) -> RiccatiEq {
    RiccatiEq::new(CoeffSet::new(0.0, a, CoeffFn::zero(), CoeffFn::zero(), CoeffFn::zero()))
}

fn exp_fn(rate: f64, coeff: f64) -> CoeffFn {
    CoeffFn::real(RealFn::Exp { rate, poly: vec![coeff] })
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let qs: Vec<Quaternion> = (0..10_000).map(|_| random_quaternion(&mut rng)).collect();
    let start = Instant::now();
    let (mut det_err, mut tr_err) = (0.0f64, 0.0f64);
    for q in &qs {
        let s = symbol(*q);
        let n2 = q.q0 * q.q0 + q.q1 * q.q1 + q.q2 * q.q2 + q.q3 * q.q3;
        det_err = det_err.max((s.determinant() - n2 * n2).abs() / (n2 * n2));
        tr_err = tr_err.max((s.trace() - 4.0 * q.q0).abs() / (4.0 * n2.sqrt()));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        det_err <= 1e-9 && tr_err <= 1e-9 && secs < 1.0,
        format!("det rel {det_err:.2e}, trace rel {tr_err:.2e}, {secs:.3} s"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (p, q) = (random_quaternion(&mut rng), random_quaternion(&mut rng));
        let lhs = *symbol(p * q).matrix();
        let rhs = symbol(p).matrix() * symbol(q).matrix();
        worst = worst.max((lhs - rhs).amax() / (p.norm() * q.norm()));
    }
    ensure(worst <= 1e-10, format!("max relative entry error {worst:.2e}"))
}

fn bump_integral(center: f64, half_width: f64, t: f64) -> f64 {
    let prim = |u: f64| u - 2.0 * u.powi(3) / 3.0 + u.powi(5) / 5.0;
    let u = ((t - center) / half_width).clamp(-1.0, 1.0);
    half_width * (prim(u) - prim(-1.0))
}

fn criterion_3() -> Outcome {
    type Primitive = Box<dyn Fn(f64) -> f64>;
    let cases: Vec<(&str, CoeffFn, Primitive)> = vec![
        ("1", CoeffFn::constant(Quaternion::ONE), Box::new(|t| t)),
        ("exp", exp_fn(-1.0, 1.0), Box::new(|t: f64| 1.0 - (-t).exp())),
        (
            "bump",
            CoeffFn::real(RealFn::Bump { center: 2.0, half_width: 1.5, height: 1.0 }),
            Box::new(|t| bump_integral(2.0, 1.5, t)),
        ),
    ];
    let lambdas = [Quaternion::ONE, -Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::new(0.5, 0.0, 0.0, 0.5)];
    let mut worst = 0.0f64;
    let mut escape = None;
    for (name, a, int_a) in &cases {
        let eq = scalar_a(a.clone());
        for &lambda in &lambdas {
            let sol = solve_with_companions(&eq, 0.0, lambda, 10.0).map_err(e)?;
            for t in linspace(0.0, 10.0, 2000) {
                let m = Quaternion::ONE + lambda * int_a(t);
                if m.norm() < 0.1 || t > sol.t_last() {
                    break;
                }
                let exact = m.recip() * lambda;
                worst = worst.max((sol.state(t).map_err(e)?.q - exact).norm());
            }
            if *name == "1" && lambda == -Quaternion::ONE {
                escape = sol.escape_time();
            }
        }
    }
    let escape_ok = escape.is_some_and(|te| (te - 1.0).abs() <= 1e-2);
    ensure(worst <= 1e-6 && escape_ok, format!("sup error {worst:.2e}, escape time {escape:?}"))
}

fn max_measured(report: &scenario::RunReport, check: &str, key: &str) -> Option<f64> {
    report.checks.iter().find(|c| c.check == check).and_then(|c| c.measured.get(key)).and_then(Value::as_f64)
}

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let start = Instant::now();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut missing = Vec::new();
    for b in BUILTINS {
        let sc = scenario::load(b.name).map_err(e)?;
        let report = scenario::run(&sc, &dir.path().join(b.name)).map_err(e)?;
        let keys = [
            ("moduli", "max_relative_deviation"),
            ("cross_moduli", "max_identity_deviation"),
            ("cross_moduli", "max_product_deviation"),
            ("matrix_oracle", "max_deviation"),
        ];
        for (check, key) in keys {
            match max_measured(&report, check, key) {
                Some(v) => {
                    let w = worst.entry(key).or_insert(0.0);
                    *w = w.max(v);
                }
                None if check == "moduli" => missing.push(b.name),
                None => {}
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let get = |k: &str| worst.get(k).copied().unwrap_or(f64::NAN);
    let (m, ci, cp, mo) = (
        get("max_relative_deviation"),
        get("max_identity_deviation"),
        get("max_product_deviation"),
        get("max_deviation"),
    );
    ensure(
        missing.is_empty() && m <= 1e-7 && ci <= 1e-6 && cp <= 1e-6 && mo <= 1e-6 && secs < 30.0,
        format!(
            "moduli {m:.2e}, cross identity {ci:.2e}, product {cp:.2e}, matrix oracle {mo:.2e}, {secs:.1} s, without moduli {missing:?}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let eq = scalar_a(exp_fn(-1.0, 1.0));
    let base = solve_with_companions(&eq, 0.0, Quaternion::ZERO, 50.0).map_err(e)?;
    let nu0 = nu_tail(&base, 0.0, 50.0).map_err(e)?.value;
    let nu_err = (nu0 - Quaternion::ONE).norm();
    let ext = extremal_solution(base, 50.0).map_err(e)?;
    let q_err = (ext.q(0.0).map_err(e)? + Quaternion::ONE).norm();
    let mut track = 0.0f64;
    for t in linspace(0.0, 10.0, 1000) {
        let exact = -t.exp();
        track = track.max((ext.q(t).map_err(e)? - Quaternion::real(exact)).norm() / exact.abs());
    }
    let seeds = [Quaternion::ZERO, Quaternion::ONE, Quaternion::real(-2.0)];
    let report = classify(&eq, 0.0, &seeds, 50.0).map_err(e)?;
    let verdicts: Vec<SeedVerdict> = report.seeds.iter().map(|s| s.verdict).collect();
    let expected = [SeedVerdict::NormalEvidence, SeedVerdict::NormalEvidence, SeedVerdict::Escaped];
    ensure(
        nu_err <= 1e-6 && q_err <= 1e-6 && track <= 1e-5 && verdicts == expected,
        format!("|nu(0)-1| {nu_err:.2e}, |q*(0)+1| {q_err:.2e}, tracking rel {track:.2e}, verdicts {verdicts:?}"),
    )
}

fn criterion_6() -> Outcome {
    let t0 = 2.798386045783887;
    let a = CoeffFn::real(RealFn::Trig { omega: 1.0, phase: 0.0, func: TrigFn::Cos, poly: vec![0.0, 1.0] });
    let eq = RiccatiEq::new(CoeffSet::new(t0, a, CoeffFn::zero(), CoeffFn::zero(), CoeffFn::zero()));
    let base = solve_with_companions(&eq, t0, Quaternion::ZERO, 200.0).map_err(e)?;
    let status = nu_tail(&base, t0, 200.0).map_err(e)?.status;
    let nonreal = [Quaternion::I, Quaternion::J, Quaternion::new(0.5, 0.0, 0.0, 0.5)];
    let report = classify(&eq, t0, &nonreal, 200.0).map_err(e)?;
    let verdicts: Vec<SeedVerdict> = report.seeds.iter().map(|s| s.verdict).collect();
    ensure(
        status == TailStatus::Oscillatory
            && verdicts.iter().all(|v| *v == SeedVerdict::NormalEvidence)
            && report.verdict != EquationVerdict::Extremal,
        format!("nu status {status:?}, nonreal seeds {verdicts:?}, equation verdict {:?}", report.verdict),
    )
}

fn criterion_7() -> Outcome {
    // q' = -(q q + b q + q c + d) with b = c = -λ, d = λλ - λ', λ = i e^{-t}.
    let minus_lambda = CoeffFn::Exp(ExpSpec { rate: -1.0, poly: [vec![], vec![-1.0], vec![], vec![]] });
    let d = CoeffFn::components([
        RealFn::Exp { rate: -2.0, poly: vec![-1.0] },
        RealFn::Exp { rate: -1.0, poly: vec![1.0] },
        RealFn::Const(0.0),
        RealFn::Const(0.0),
    ]);
    let eq = RiccatiEq::new(CoeffSet::new(0.0, CoeffFn::constant(Quaternion::ONE), minus_lambda.clone(), minus_lambda, d));
    let lambda = |t: f64| Quaternion::I * (-t).exp();
    let sol = solve_with_companions(&eq, 0.0, Quaternion::I, 10.0).map_err(e)?;
    let (mut res, mut dev, mut comp) = (0.0f64, 0.0f64, 0.0f64);
    for t in linspace(0.0, 10.0, 1000) {
        let l = lambda(t);
        res = res.max((eq.rhs(t, l).map_err(e)? + l).norm());
        let s = sol.state(t).map_err(e)?;
        dev = dev.max((s.q - l).norm());
        comp = comp.max((s.phi - Quaternion::ONE).norm()).max((s.psi - Quaternion::ONE).norm());
    }
    ensure(
        res < 1e-8 && dev < 1e-8 && comp <= 1e-8,
        format!("equation residual {res:.2e}, |q - lambda| {dev:.2e}, |phi - 1|, |psi - 1| {comp:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let sys = LinearSystem::new(
        0.0,
        CoeffFn::constant(Quaternion::I),
        CoeffFn::zero(),
        CoeffFn::zero(),
        CoeffFn::constant(Quaternion::K),
    );
    let eq = to_riccati(&sys);
    let opts = LinearOptions::default();
    let rights = [Quaternion::J, Quaternion::new(1.0, 1.0, 0.0, 0.0), Quaternion::new(0.2, -0.7, 0.4, 1.1)];
    let (mut round_trip, mut analytic, mut modulus, mut right, mut left) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in [Quaternion::ONE, Quaternion::new(0.3, -0.2, 0.5, 0.1)] {
        let sol = solve_with_companions(&eq, 0.0, seed, 10.0).map_err(e)?;
        let lsol = lift(&sys, Arc::new(sol.clone()), Quaternion::ONE, 10.0, &opts).map_err(e)?;
        let grid = linspace(0.0, 10.0, 200);
        let projected = project(&lsol, &grid).map_err(e)?;
        for (&t, p) in grid.iter().zip(&projected) {
            let q = sol.state(t).map_err(e)?.q;
            round_trip = round_trip.max((*p - q).norm() / q.norm().max(1.0));
            // φ = e^{it}, ψ = e^{kt} q1.
            let exact = Quaternion::new(t.cos(), 0.0, 0.0, t.sin()) * seed * Quaternion::new(t.cos(), -t.sin(), 0.0, 0.0);
            analytic = analytic.max((q - exact).norm());
            let (lhs, rhs) = modulus_formula_check(&lsol, t).map_err(e)?;
            modulus = modulus.max((lhs - rhs).abs() / rhs);
            for &r in &rights {
                right = right.max(residual(&lsol, t, Multiplier::Right(r)).map_err(e)?);
            }
            left = left.max(residual(&lsol, t, Multiplier::Left(Quaternion::J)).map_err(e)?);
        }
    }
    ensure(
        round_trip < 1e-8 && analytic < 1e-8 && modulus <= 1e-6 && right <= 1e-7 && left > 0.1,
        format!(
            "round trip {round_trip:.2e}, vs closed form {analytic:.2e}, modulus {modulus:.2e}, right residual {right:.2e}, left residual {left:.2e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let sys = LinearSystem::new(0.0, CoeffFn::zero(), exp_fn(-2.0, 1.0), CoeffFn::zero(), CoeffFn::zero());
    let h = 40.0;
    let report = thm42_check(&sys, &[0], h).map_err(e)?;
    let d0_zero = report.samples.iter().all(|s| s.d_verbatim[0] == 0.0 && s.d_symmetrized[0] == 0.0);

    let base = solve_with_companions(&to_riccati(&sys), 0.0, Quaternion::ZERO, 60.0).map_err(e)?;
    let ext = extremal_solution(base, 60.0).map_err(e)?;
    let opts = LinearOptions::default();
    let principal = lift(&sys, Arc::new(ext), Quaternion::ONE, h, &opts).map_err(e)?;
    let p10 = solve_system(&sys, 0.0, Quaternion::ONE, Quaternion::ZERO, h, &opts).map_err(e)?;
    let p11 = solve_system(&sys, 0.0, Quaternion::ONE, Quaternion::ONE, h, &opts).map_err(e)?;

    let s_principal = statement2_integral(&principal, 0.0, h).map_err(e)?;
    let s_pair = statement2_integral(&p11, 0.0, h).map_err(e)?;
    let grid = linspace(0.0, h, 200);
    let dominated = asymptotic_ratios(&principal, &p10, &grid).map_err(e)?;
    let comparable = asymptotic_ratios(&p10, &p11, &grid).map_err(e)?;

    // φ = e^{-2t} along the principal solution, φ = 3/2 - e^{-2t}/2 from (1, 1).
    let mut phi_err = 0.0f64;
    for &t in &grid {
        let x = (-2.0 * t).exp();
        phi_err = phi_err.max((principal.phi(t).map_err(e)?.norm() - x).abs() / x);
        phi_err = phi_err.max((p11.phi(t).map_err(e)?.norm() - (1.5 - 0.5 * x)).abs());
    }

    ensure(
        report.conclusion == Conclusion::NormalOrExtremal
            && d0_zero
            && s_pair.status.is_converged()
            && s_principal.status == TailStatus::DivergesToInfinity
            && s_principal.value > 1e3
            && dominated.monotone_decreasing
            && dominated.final_over_initial < 1e-3
            && comparable.last_decade_drift < 1e-3
            && phi_err <= 1e-6,
        format!(
            "conclusion {:?}, D_0 = 0: {d0_zero}, statement-2 pair {:?} principal {:?} ({:.2e}), ratio monotone {} final/initial {:.2e}, pair drift {:.2e}, closed-form phi {phi_err:.2e}",
            report.conclusion,
            s_pair.status,
            s_principal.status,
            s_principal.value,
            dominated.monotone_decreasing,
            dominated.final_over_initial,
            comparable.last_decade_drift,
        ),
    )
}

fn read_tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(e)? {
        let entry = entry.map_err(e)?;
        out.insert(entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path()).map_err(e)?);
    }
    Ok(out)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let mut files = 0;
    let mut differing = Vec::new();
    for b in BUILTINS {
        let mut trees = Vec::new();
        for run in ["a", "b"] {
            let out = dir.path().join(run);
            let status = Command::new(env!("CARGO_BIN_EXE_qr"))
                .args(["run", b.name, "--out"])
                .arg(&out)
                .output()
                .map_err(e)?;
            if !status.status.success() {
                return Err(format!("qr run {} exited with {}", b.name, status.status));
            }
            trees.push(read_tree(&out.join(b.name))?);
        }
        files += trees[0].len();
        if trees[0] != trees[1] {
            differing.push(b.name);
        }
    }
    ensure(differing.is_empty(), format!("{files} files compared, differing scenarios {differing:?}"))
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
