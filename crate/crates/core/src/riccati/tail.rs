//! The tail integral `ν_q(t) = ∫_t^∞ φ_q⁻¹ a ψ_q⁻¹` and the extremal solution `q − ν⁻¹`.

use serde::{Deserialize, Serialize};

use super::{RiccatiError, RiccatiPath, RiccatiSolution};
use crate::quadrature::{self, gk15_vec};
use crate::quat::Quaternion;

pub const NU_ZERO_TOL: f64 = 1e-8;
pub const TAIL_TOL: f64 = 1e-8;
/// Uniform grid size for the zero scan.
pub const NU_GRID: usize = 1000;
/// Number of increasing windows used for the convergence diagnosis.
pub const TAIL_WINDOWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TailStatus {
    /// `error` is the change over the last window.
    Converged { error: f64 },
    DivergesToInfinity,
    Oscillatory,
}

impl TailStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, TailStatus::Converged { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub tail_tol: f64,
    pub diverge_threshold: f64,
}

impl Default for TailParams {
    fn default() -> Self {
        Self { tail_tol: TAIL_TOL, diverge_threshold: 1.0 / TAIL_TOL }
    }
}

/// Diagnoses a sequence of partial integrals over increasing windows.
///
/// Converged: the last window changes the value by less than `tail_tol·max(1, |P|)`
/// and no more than the middle window did. Diverges: the partial norms grow
/// monotonically over the second half and either exceed `diverge_threshold` or keep
/// non-shrinking increments. Anything else is oscillatory/unknown.
pub fn tail_diagnosis(partials: &[Quaternion], p: &TailParams) -> TailStatus {
    if partials.len() < 3 {
        return TailStatus::Oscillatory;
    }
    let diffs: Vec<f64> = partials.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let last = *partials.last().unwrap();
    let d_last = *diffs.last().unwrap();
    let d_mid = diffs[diffs.len() / 2];
    if d_last < p.tail_tol * last.norm().max(1.0) && d_last <= d_mid {
        return TailStatus::Converged { error: d_last };
    }
    let half = partials.len() / 2;
    let monotone = partials[half..].windows(2).all(|w| w[1].norm() >= w[0].norm());
    if monotone && (last.norm() > p.diverge_threshold || d_last >= d_mid) {
        return TailStatus::DivergesToInfinity;
    }
    TailStatus::Oscillatory
}

/// Backward cumulative integrals of `φ⁻¹ a ψ⁻¹` and its norm from a solution's step nodes
/// down from the truncation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct NuTable {
    nodes: Vec<f64>,
    back: Vec<Quaternion>,
    back_abs: Vec<f64>,
    /// Sum of the per-panel Gauss–Kronrod error estimates.
    pub quad_error: f64,
}

fn integrand(sol: &RiccatiSolution, t: f64) -> [f64; 5] {
    let eval = || -> Result<Quaternion, RiccatiError> {
        let s = sol.state(t)?;
        let a = sol.equation().coeffs.a.eval(t)?;
        Ok(s.phi.recip() * a * s.psi.recip())
    };
    match eval() {
        Ok(v) => [v.q0, v.q1, v.q2, v.q3, v.norm()],
        Err(_) => [f64::NAN; 5],
    }
}

fn split(v: [f64; 5]) -> (Quaternion, f64) {
    (Quaternion::new(v[0], v[1], v[2], v[3]), v[4])
}

/// Panels are bisected until the Kronrod error estimate is this fraction of the absolute mass
/// from the panel to the horizon, so that every `ν(t)` is resolved to relative accuracy.
const PANEL_RTOL: f64 = 1e-12;
const PANEL_DEPTH: u32 = 30;

struct Panels<F> {
    f: F,
    /// `(left end, integral, absolute integral)`, right to left.
    out: Vec<(f64, Quaternion, f64)>,
    quad_error: f64,
}

impl<F: FnMut(f64) -> [f64; 5]> Panels<F> {
    /// Adds `[a, b]` given the absolute mass to the right of `b`; returns the mass of `[a, b]`.
    fn refine(&mut self, a: f64, b: f64, tail: f64, depth: u32) -> Result<f64, RiccatiError> {
        let (v, e) = gk15_vec(&mut self.f, a, b);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(quadrature::QuadError::NonFinite(a).into());
        }
        let mid = 0.5 * (a + b);
        if e <= PANEL_RTOL * (v[4] + tail) || depth == 0 || mid <= a || mid >= b {
            self.quad_error += e;
            let (q, m) = split(v);
            self.out.push((a, q, m));
            return Ok(m);
        }
        let right = self.refine(mid, b, tail, depth - 1)?;
        Ok(right + self.refine(a, mid, tail + right, depth - 1)?)
    }
}

impl NuTable {
    pub fn build(sol: &RiccatiSolution, from: f64, horizon: f64) -> Result<Self, RiccatiError> {
        let hi = horizon.min(sol.t_last());
        if !(from >= sol.t1() && from < hi) {
            return Err(RiccatiError::OutOfRange { t: from, lo: sol.t1(), hi });
        }
        let mut steps = vec![from];
        steps.extend(sol.times().iter().copied().filter(|&t| t > from && t < hi));
        steps.push(hi);
        let mut panels = Panels { f: |t: f64| integrand(sol, t), out: Vec::new(), quad_error: 0.0 };
        let mut tail = 0.0;
        for w in steps.windows(2).rev() {
            tail += panels.refine(w[0], w[1], tail, PANEL_DEPTH)?;
        }
        let quad_error = panels.quad_error;
        let n = panels.out.len() + 1;
        let mut nodes = Vec::with_capacity(n);
        let mut back = Vec::with_capacity(n);
        let mut back_abs = Vec::with_capacity(n);
        nodes.push(hi);
        back.push(Quaternion::ZERO);
        back_abs.push(0.0);
        for &(a, q, m) in &panels.out {
            nodes.push(a);
            back.push(*back.last().unwrap() + q);
            back_abs.push(*back_abs.last().unwrap() + m);
        }
        nodes.reverse();
        back.reverse();
        back_abs.reverse();
        Ok(Self { nodes, back, back_abs, quad_error })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    /// `(∫_t^H φ⁻¹aψ⁻¹, ∫_t^H |φ⁻¹aψ⁻¹|)` for the truncation horizon `H`.
    pub fn at(&self, sol: &RiccatiSolution, t: f64) -> Result<(Quaternion, f64), RiccatiError> {
        let (lo, hi) = self.span();
        if !(t >= lo && t <= hi) {
            return Err(RiccatiError::OutOfRange { t, lo, hi });
        }
        let p = self.nodes.partition_point(|&x| x <= t);
        let k = p - 1;
        if self.nodes[k] == t {
            return Ok((self.back[k], self.back_abs[k]));
        }
        let (v, _) = gk15_vec(&mut |s: f64| integrand(sol, s), t, self.nodes[k + 1]);
        let (part, part_abs) = split(v);
        Ok((part + self.back[k + 1], part_abs + self.back_abs[k + 1]))
    }

    /// Zero test relative to the absolute tail mass; an identically vanishing tail counts as zero.
    pub fn is_zero(&self, sol: &RiccatiSolution, t: f64) -> Result<bool, RiccatiError> {
        let (nu, mass) = self.at(sol, t)?;
        Ok(nu.norm() <= NU_ZERO_TOL * mass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuTail {
    pub status: TailStatus,
    /// Truncated tail `∫_t^H`.
    pub value: Quaternion,
    pub t: f64,
    pub horizon: f64,
    /// Times in `[t, H)` where the tail vanishes.
    pub zeros: Vec<f64>,
}

pub fn nu_tail(sol: &RiccatiSolution, t: f64, horizon: f64) -> Result<NuTail, RiccatiError> {
    nu_tail_with(sol, t, horizon, &TailParams::default())
}

pub fn nu_tail_with(sol: &RiccatiSolution, t: f64, horizon: f64, params: &TailParams) -> Result<NuTail, RiccatiError> {
    let table = NuTable::build(sol, t, horizon)?;
    let (_, hi) = table.span();
    let (value, _) = table.at(sol, t)?;
    let partials: Vec<Quaternion> = (1..=TAIL_WINDOWS)
        .map(|j| {
            let tj = if j == TAIL_WINDOWS { hi } else { t + (hi - t) * j as f64 / TAIL_WINDOWS as f64 };
            table.at(sol, tj).map(|(v, _)| value - v)
        })
        .collect::<Result<_, _>>()?;
    let status = tail_diagnosis(&partials, params);
    let zeros = scan_zeros(&table, sol, t, hi)?;
    Ok(NuTail { status, value, t, horizon: hi, zeros })
}

fn scan_zeros(table: &NuTable, sol: &RiccatiSolution, lo: f64, hi: f64) -> Result<Vec<f64>, RiccatiError> {
    let grid: Vec<f64> = (0..NU_GRID).map(|i| lo + (hi - lo) * i as f64 / NU_GRID as f64).collect();
    let vals: Vec<(Quaternion, f64)> = grid.iter().map(|&s| table.at(sol, s)).collect::<Result<_, _>>()?;
    let zero = |(nu, mass): (Quaternion, f64)| nu.norm() <= NU_ZERO_TOL * mass;
    let mut zeros = Vec::new();
    for i in 0..grid.len() {
        if zero(vals[i]) {
            zeros.push(grid[i]);
            continue;
        }
        let r = vals[i].0.norm();
        let left = if i > 0 { vals[i - 1].0.norm() } else { f64::INFINITY };
        let right = if i + 1 < grid.len() { vals[i + 1].0.norm() } else { f64::INFINITY };
        if i == 0 || i + 1 == grid.len() || r > left || r > right {
            continue;
        }
        let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if table.at(sol, x1)?.0.norm() <= table.at(sol, x2)?.0.norm() {
                b = x2;
            } else {
                a = x1;
            }
        }
        let s = 0.5 * (a + b);
        if zero(table.at(sol, s)?) {
            zeros.push(s);
        }
    }
    Ok(zeros)
}

/// `q(t) − ν(t)⁻¹` using the solution's own trajectory as the truncation horizon.
pub fn extremal_candidate(sol: &RiccatiSolution, t: f64) -> Result<Quaternion, RiccatiError> {
    let tail = nu_tail(sol, t, sol.t_last())?;
    if !tail.status.is_converged() {
        return Err(RiccatiError::TailNotConverged(tail.status));
    }
    let table = NuTable::build(sol, t, sol.t_last())?;
    if table.is_zero(sol, t)? {
        return Err(RiccatiError::NuVanishes { t, norm: tail.value.norm() });
    }
    Ok(sol.q(t)? - tail.value.recip())
}

/// The extremal path `q₀ − ν_{q₀}⁻¹` over `[t1, H)`.
#[derive(Debug, Clone)]
pub struct ExtremalSolution {
    base: RiccatiSolution,
    table: NuTable,
    pub tail: NuTail,
}

pub fn extremal_solution(base: RiccatiSolution, horizon: f64) -> Result<ExtremalSolution, RiccatiError> {
    let tail = nu_tail(&base, base.t1(), horizon)?;
    if !tail.status.is_converged() {
        return Err(RiccatiError::TailNotConverged(tail.status));
    }
    if let Some(&t) = tail.zeros.first() {
        return Err(RiccatiError::NuVanishes { t, norm: 0.0 });
    }
    let table = NuTable::build(&base, base.t1(), horizon)?;
    Ok(ExtremalSolution { base, table, tail })
}

impl ExtremalSolution {
    pub fn base(&self) -> &RiccatiSolution {
        &self.base
    }

    pub fn nu(&self, t: f64) -> Result<Quaternion, RiccatiError> {
        Ok(self.table.at(&self.base, t)?.0)
    }
}

impl RiccatiPath for ExtremalSolution {
    fn span(&self) -> (f64, f64) {
        self.table.span()
    }

    fn q(&self, t: f64) -> Result<Quaternion, RiccatiError> {
        let (nu, mass) = self.table.at(&self.base, t)?;
        if nu.norm() <= NU_ZERO_TOL * mass {
            return Err(RiccatiError::NuVanishes { t, norm: nu.norm() });
        }
        Ok(self.base.q(t)? - nu.recip())
    }
}

/// `∫_{t1}^{upto} Re[a (q* − q_N)]` for an extremal path and another solution.
pub fn statement5_integral(ext: &ExtremalSolution, other: &RiccatiSolution, upto: f64) -> Result<f64, RiccatiError> {
    let coeffs = &ext.base.equation().coeffs;
    let f = |t: f64| -> f64 {
        let v = || -> Result<f64, RiccatiError> { Ok((coeffs.a.eval(t)? * (ext.q(t)? - other.q(t)?)).re()) };
        v().unwrap_or(f64::NAN)
    };
    let scale = 1e-9 * (1.0 + upto - ext.base.t1());
    Ok(quadrature::integrate(f, ext.base.t1(), upto, scale)?.value)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{exp_decay, scalar_a};
    use super::super::*;
    use crate::coeffs::{BumpSpec, CoeffFn, RealFn, TrigFn};

    #[test]
    fn diagnosis_table() {
        let p = TailParams::default();
        let conv: Vec<Quaternion> = (1..=20).map(|k| Quaternion::real(1.0 - (-(k as f64) * 3.0).exp())).collect();
        assert!(tail_diagnosis(&conv, &p).is_converged());
        let lin: Vec<Quaternion> = (1..=20).map(|k| Quaternion::real(k as f64)).collect();
        assert_eq!(tail_diagnosis(&lin, &p), TailStatus::DivergesToInfinity);
        let osc: Vec<Quaternion> = (1..=20).map(|k| Quaternion::real((k as f64).sin() * k as f64)).collect();
        assert_eq!(tail_diagnosis(&osc, &p), TailStatus::Oscillatory);
    }

    #[test]
    fn exponential_tail_converges_to_one() {
        let eq = scalar_a(exp_decay());
        let sol = solve_with_companions(&eq, 0.0, Quaternion::ZERO, 50.0).unwrap();
        let tail = nu_tail(&sol, 0.0, 50.0).unwrap();
        assert!(tail.status.is_converged(), "{:?}", tail.status);
        assert!((tail.value.re() - 1.0).abs() < 1e-9);
        assert!(tail.zeros.is_empty(), "{:?}", &tail.zeros[..tail.zeros.len().min(5)]);
        let q = extremal_candidate(&sol, 0.0).unwrap();
        assert!((q.re() + 1.0).abs() < 1e-9);
        let ext = extremal_solution(sol.clone(), 50.0).unwrap();
        for t in [0.0, 2.0, 7.5, 10.0] {
            let v = ext.q(t).unwrap();
            assert!((v.re() + t.exp()).abs() < 1e-8 * t.exp(), "t={t}: {v}");
        }
        let s5 = statement5_integral(&ext, &sol, 20.0).unwrap();
        assert!((s5 + 20.0).abs() < 1e-6, "{s5}");
    }

    #[test]
    fn deep_tail_keeps_relative_accuracy() {
        // The trivial solution takes very long steps; ν(t) = (e^{-2t} − e^{-120}) / 2.
        let eq = scalar_a(CoeffFn::real(RealFn::Exp { rate: -2.0, poly: vec![1.0] }));
        let sol = solve_with_companions(&eq, 0.0, Quaternion::ZERO, 60.0).unwrap();
        let table = NuTable::build(&sol, 0.0, 60.0).unwrap();
        for t in [10.0, 25.0, 40.0, 55.0] {
            let exact = ((-2.0f64 * t).exp() - (-120.0f64).exp()) / 2.0;
            let (nu, _) = table.at(&sol, t).unwrap();
            assert!(((nu.re() - exact) / exact).abs() < 1e-11, "t = {t}: {nu} vs {exact}");
        }
    }

    #[test]
    fn bounded_support_tail_vanishes() {
        let bump = CoeffFn::Bump(BumpSpec { center: 2.0, half_width: 1.5, value: Quaternion::ONE });
        let eq = scalar_a(bump);
        let sol = solve_with_companions(&eq, 0.0, Quaternion::ZERO, 20.0).unwrap();
        let tail = nu_tail(&sol, 0.0, 20.0).unwrap();
        assert!(!tail.zeros.is_empty());
        assert!(tail.zeros[0] >= 3.5 - 1e-9 && tail.zeros[0] < 3.6, "{}", tail.zeros[0]);
        assert!(matches!(extremal_candidate(&sol, 5.0), Err(RiccatiError::NuVanishes { .. })));
        assert!(matches!(extremal_solution(sol, 20.0), Err(RiccatiError::NuVanishes { .. })));
    }

    #[test]
    fn oscillating_tail_is_not_convergent() {
        let a = CoeffFn::real(RealFn::Trig { omega: 1.0, phase: 0.0, func: TrigFn::Cos, poly: vec![0.0, 1.0] });
        let eq = scalar_a(a);
        let sol = solve_with_companions(&eq, 0.0, Quaternion::ZERO, 60.0).unwrap();
        let tail = nu_tail(&sol, 0.0, 60.0).unwrap();
        assert_eq!(tail.status, TailStatus::Oscillatory);
        assert!(matches!(extremal_candidate(&sol, 0.0), Err(RiccatiError::TailNotConverged(_))));
    }
}
