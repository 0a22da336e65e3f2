use proptest::prelude::*;
use qriccati::coeffs::{CoeffFn, CoeffSet, ExpSpec};
use qriccati::linear_system::{residual, solve_system, LinearOptions, LinearSystem, Multiplier};
use qriccati::quat::{symbol, unsymbol, Quaternion};
use qriccati::riccati::{family_member, modulus_identities_check, solve_with_companions, RiccatiEq, RiccatiSolution};
use qriccati::scenario::format_number;

fn quat(scale: f64) -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-scale..scale).prop_map(Quaternion::from)
}

fn nonzero_quat() -> impl Strategy<Value = Quaternion> {
    quat(10.0).prop_filter("away from zero", |q| q.norm() > 1e-3)
}

/// Constants and decaying exponentials with entries bounded by `scale`.
fn coeff(scale: f64) -> impl Strategy<Value = CoeffFn> {
    prop_oneof![
        quat(scale).prop_map(CoeffFn::Const),
        (-1.0..0.0f64, quat(scale)).prop_map(|(rate, q)| CoeffFn::Exp(ExpSpec {
            rate,
            poly: [vec![q.q0], vec![q.q1], vec![q.q2], vec![q.q3]],
        })),
    ]
}

fn equation() -> impl Strategy<Value = RiccatiEq> {
    (coeff(0.5), coeff(0.5), coeff(0.5), coeff(0.5)).prop_map(|(a, b, c, d)| RiccatiEq::new(CoeffSet::new(0.0, a, b, c, d)))
}

fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

/// Grid points on `[0, end]` before `sol` (if escaping) gets within 10% of its escape.
fn regular_grid(sols: &[&RiccatiSolution], end: f64) -> Vec<f64> {
    let hi = sols.iter().map(|s| if s.is_regular() { s.t_last() } else { 0.9 * s.t_last() }).fold(end, f64::min);
    (0..=100).map(|i| hi * i as f64 / 100.0).collect()
}

proptest! {
    #[test]
    fn multiplication_is_associative_and_norm_multiplicative(p in quat(10.0), q in quat(10.0), r in quat(10.0)) {
        prop_assert!(close((p * q) * r, p * (q * r), 1e-12));
        prop_assert!(((p * q).norm() - p.norm() * q.norm()).abs() <= 1e-12 * (1.0 + p.norm() * q.norm()));
        prop_assert!(close((p * q).conj(), q.conj() * p.conj(), 1e-12));
    }

    #[test]
    fn inverse_is_two_sided(q in nonzero_quat()) {
        let inv = q.inverse().unwrap();
        prop_assert!(close(q * inv, Quaternion::ONE, 1e-12));
        prop_assert!(close(inv * q, Quaternion::ONE, 1e-12));
    }

    #[test]
    fn symbol_is_an_invertible_homomorphism(p in quat(10.0), q in quat(10.0)) {
        let lhs = *symbol(p * q).matrix();
        let rhs = symbol(p).matrix() * symbol(q).matrix();
        prop_assert!((lhs - rhs).amax() <= 1e-12 * (1.0 + p.norm() * q.norm()));
        prop_assert!(close(unsymbol(&symbol(p)).unwrap(), p, 1e-15));
        prop_assert!((symbol(p).trace() - 4.0 * p.q0).abs() <= 1e-12 * (1.0 + p.norm()));
    }

    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = format_number(x).parse().unwrap();
        prop_assert_eq!(back, if x == 0.0 { 0.0 } else { x });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn family_formula_reproduces_direct_solutions(eq in equation(), q1 in quat(1.0), lambda in quat(0.5)) {
        let base = solve_with_companions(&eq, 0.0, q1, 5.0).unwrap();
        let direct = solve_with_companions(&eq, 0.0, q1 + lambda, 5.0).unwrap();
        for t in regular_grid(&[&base, &direct], 5.0) {
            let m = Quaternion::ONE + lambda * base.mu(t).unwrap();
            if m.norm() < 0.1 {
                break;
            }
            let f = family_member(&base, lambda, t).unwrap();
            let d = direct.state(t).unwrap().q;
            prop_assert!(close(f, d, 1e-6), "t = {}: family {} direct {}", t, f, d);
        }
    }

    #[test]
    fn moduli_match_their_exponential_forms(eq in equation(), q1 in quat(1.0), lambda in quat(0.5)) {
        let a = solve_with_companions(&eq, 0.0, q1, 5.0).unwrap();
        prop_assert!(a.max_modulus_deviation() <= 1e-7);
        let b = solve_with_companions(&eq, 0.0, q1 + lambda, 5.0).unwrap();
        for t in regular_grid(&[&a, &b], 5.0) {
            let m = modulus_identities_check(&a, &b, t).unwrap();
            if m.lhs < 0.1 || m.product / m.lhs < 0.1 {
                break;
            }
            prop_assert!((m.lhs - m.rhs).abs() <= 1e-6 * m.rhs, "t = {}: {:?}", t, m);
            prop_assert!((m.product - 1.0).abs() <= 1e-6, "t = {}: {:?}", t, m);
        }
    }

    #[test]
    fn right_multipliers_preserve_solutions(
        a in prop::array::uniform4(quat(0.5)),
        phi1 in quat(1.0).prop_filter("nonzero", |q| q.norm() > 0.1),
        psi1 in quat(1.0),
        l in quat(2.0),
    ) {
        let sys = LinearSystem::new(
            0.0,
            CoeffFn::Const(a[0]),
            CoeffFn::Const(a[1]),
            CoeffFn::Const(a[2]),
            CoeffFn::Const(a[3]),
        );
        let sol = solve_system(&sys, 0.0, phi1, psi1, 3.0, &LinearOptions::default()).unwrap();
        for i in 0..=30 {
            let t = 0.1 * i as f64;
            let r = residual(&sol, t, Multiplier::Right(l)).unwrap();
            prop_assert!(r <= 1e-7 * l.norm().max(1.0), "t = {}: residual {}", t, r);
        }
    }
}
