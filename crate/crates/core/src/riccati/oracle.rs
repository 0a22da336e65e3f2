//! Independent cross-check through the 4×4 real matrix Riccati equation of symbols.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::{solve_with_options, RiccatiEq, RiccatiError, SolveOptions};
use crate::ode::{self, Accumulator, OdeError, OdeProblem};
use crate::quat::Quaternion;

/// Samples used to compare the two integrations.
const ORACLE_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixOracleReport {
    /// `max ‖symbol(q) − Y‖_∞ / max(1, ‖Y‖_∞)` over the grid.
    pub max_deviation: f64,
    /// Same measure for `symbol(φ_q)` against `Φ_Y`.
    pub max_phi_deviation: f64,
    /// Relative mismatch of `det Φ_Y` against `exp ∫ tr(A Y + C)`.
    pub det_phi_deviation: f64,
    /// Relative mismatch of `det Ψ_Y` against `exp ∫ tr(A Y + B)`.
    pub det_psi_deviation: f64,
    /// Right end of the compared interval.
    pub t_end: f64,
}

fn inf_norm(m: &Matrix4<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn mat(s: &[f64]) -> Matrix4<f64> {
    Matrix4::from_column_slice(s)
}

fn sym(q: Quaternion) -> Matrix4<f64> {
    *q.symbol().matrix()
}

pub fn matrix_oracle_check(eq: &RiccatiEq, t1: f64, q1: Quaternion, t_end: f64) -> Result<MatrixOracleReport, RiccatiError> {
    matrix_oracle_with(eq, t1, q1, t_end, &SolveOptions::default())
}

pub fn matrix_oracle_with(
    eq: &RiccatiEq,
    t1: f64,
    q1: Quaternion,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<MatrixOracleReport, RiccatiError> {
    let sol = solve_with_options(eq, t1, q1, t_end, opts)?;
    let coeffs = &eq.coeffs;
    let symbols = |t: f64| -> Result<[Matrix4<f64>; 4], OdeError> {
        let abcd = coeffs.eval(t).map_err(|e| OdeError::rhs(t, e))?;
        Ok(abcd.map(sym))
    };
    let mut y0 = vec![0.0; 48];
    y0[..16].copy_from_slice(sym(q1).as_slice());
    y0[16..32].copy_from_slice(Matrix4::<f64>::identity().as_slice());
    y0[32..48].copy_from_slice(Matrix4::<f64>::identity().as_slice());
    let problem = OdeProblem::new(12, t1, y0, |t, y, dy| {
        let [a, b, c, d] = symbols(t)?;
        let (ym, phi, psi) = (mat(&y[..16]), mat(&y[16..32]), mat(&y[32..48]));
        let dym = -(ym * a * ym + b * ym + ym * c + d);
        let dphi = (a * ym + c) * phi;
        let dpsi = psi * (b + ym * a);
        dy[..16].copy_from_slice(dym.as_slice());
        dy[16..32].copy_from_slice(dphi.as_slice());
        dy[32..48].copy_from_slice(dpsi.as_slice());
        Ok(())
    })
    .with_escape_norm(opts.escape_norm)
    .with_escape_slots(4);
    let traces = Accumulator::new("tr", 2, |t, y, out| {
        let [a, b, c, _] = symbols(t)?;
        let ay = a * mat(&y[..16]);
        out[0] = (ay + c).trace();
        out[1] = (ay + b).trace();
        Ok(())
    });
    let tr = ode::solve(&problem, t_end, opts.tol, &[traces])?;
    let hi = sol.t_last().min(tr.t_last());
    let mut rep = MatrixOracleReport {
        max_deviation: 0.0,
        max_phi_deviation: 0.0,
        det_phi_deviation: 0.0,
        det_psi_deviation: 0.0,
        t_end: hi,
    };
    for i in 0..=ORACLE_GRID {
        let t = t1 + (hi - t1) * i as f64 / ORACLE_GRID as f64;
        let s = sol.state(t)?;
        let m = tr.query(t)?;
        let (ym, phi, psi) = (mat(&m[..16]), mat(&m[16..32]), mat(&m[32..48]));
        let rel = |x: Matrix4<f64>, reference: &Matrix4<f64>| inf_norm(&(x - reference)) / inf_norm(reference).max(1.0);
        rep.max_deviation = rep.max_deviation.max(rel(sym(s.q), &ym));
        rep.max_phi_deviation = rep.max_phi_deviation.max(rel(sym(s.phi), &phi));
        let (lphi, lpsi) = (m[48].exp(), m[49].exp());
        rep.det_phi_deviation = rep.det_phi_deviation.max((phi.determinant() - lphi).abs() / lphi);
        rep.det_psi_deviation = rep.det_psi_deviation.max((psi.determinant() - lpsi).abs() / lpsi);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{exp_decay, scalar_a};
    use super::*;
    use crate::coeffs::{CoeffFn, CoeffSet};

    #[test]
    fn zero_solution_has_zero_deviation() {
        let eq = scalar_a(exp_decay());
        let r = matrix_oracle_check(&eq, 0.0, Quaternion::ZERO, 5.0).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        assert_eq!(r.det_phi_deviation, 0.0);
    }

    #[test]
    fn scalar_example_agrees() {
        let eq = scalar_a(exp_decay());
        let r = matrix_oracle_check(&eq, 0.0, Quaternion::ONE, 5.0).unwrap();
        assert!(r.max_deviation < 1e-7, "{r:?}");
        assert!(r.det_phi_deviation < 1e-7 && r.det_psi_deviation < 1e-7, "{r:?}");
    }

    #[test]
    fn noncommuting_coefficients_agree() {
        let set = CoeffSet::new(
            0.0,
            CoeffFn::constant(Quaternion::new(0.2, 0.5, -0.1, 0.0)),
            CoeffFn::constant(Quaternion::new(0.0, 0.3, 0.0, 0.2)),
            CoeffFn::constant(Quaternion::new(-0.1, 0.0, 0.4, 0.0)),
            CoeffFn::constant(Quaternion::new(0.1, 0.0, 0.0, 0.3)),
        );
        let r = matrix_oracle_check(&RiccatiEq::new(set), 0.0, Quaternion::new(0.1, 0.2, -0.3, 0.4), 4.0).unwrap();
        assert!(r.max_deviation < 1e-7 && r.max_phi_deviation < 1e-7, "{r:?}");
        assert!(r.det_phi_deviation < 1e-7 && r.det_psi_deviation < 1e-7, "{r:?}");
    }
}
