//! Adaptive Gauss–Kronrod (7/15) quadrature with global interval bisection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Subdivision budget (number of live intervals).
pub const MAX_INTERVALS: usize = 1 << 14;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature tolerance not met: error estimate {estimate:e} > {tol:e} after {intervals} intervals")]
    ToleranceNotMet {
        value: f64,
        estimate: f64,
        tol: f64,
        intervals: usize,
    },
    #[error("non-finite integrand value at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point Kronrod panel on `[a, b]`: `(kronrod, |kronrod − gauss|)`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (n, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if n % 2 == 1 {
            gauss += WG[n / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Vector-valued 15-point Kronrod panel; the error is the largest componentwise `|K − G|`.
pub fn gk15_vec<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc.map(|v| WGK[7] * v);
    let mut gauss = fc.map(|v| WG[3] * v);
    for (n, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let (lo, hi) = (f(center - dx), f(center + dx));
        for i in 0..N {
            let pair = lo[i] + hi[i];
            kronrod[i] += w * pair;
            if n % 2 == 1 {
                gauss[i] += WG[n / 2] * pair;
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..N {
        err = err.max(((kronrod[i] - gauss[i]) * half).abs());
        kronrod[i] *= half;
    }
    (kronrod, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrates `f` over `[a, b]` (either orientation) to an absolute error estimate `<= tol`,
/// bisecting the worst panel until the budget of [`MAX_INTERVALS`] panels is used.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature, QuadError> {
    integrate_with_budget(&mut f, a, b, tol, MAX_INTERVALS)
}

pub fn integrate_with_budget<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    budget: usize,
) -> Result<Quadrature, QuadError> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, intervals: 0 });
    }
    if b < a {
        return integrate_with_budget(f, b, a, tol, budget).map(|q| Quadrature { value: -q.value, ..q });
    }
    let mut bad = None;
    let mut guarded = |t: f64| {
        let v = f(t);
        if !v.is_finite() && bad.is_none() {
            bad = Some(t);
        }
        v
    };
    let (value, error) = gk15(&mut guarded, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total_err = error;
    while total_err > tol && heap.len() < budget {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut guarded, worst.a, mid);
        let (v2, e2) = gk15(&mut guarded, mid, worst.b);
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        // Re-sum periodically so running-sum drift cannot mask convergence.
        if heap.len() % 256 == 0 {
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    if let Some(t) = bad {
        return Err(QuadError::NonFinite(t));
    }
    let total: f64 = heap.iter().map(|p| p.value).sum();
    total_err = heap.iter().map(|p| p.error).sum();
    if total_err > tol {
        return Err(QuadError::ToleranceNotMet {
            value: total,
            estimate: total_err,
            tol,
            intervals: heap.len(),
        });
    }
    Ok(Quadrature { value: total, error: total_err, intervals: heap.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact_on_one_panel() {
        // Kronrod-15 integrates degree <= 22 exactly.
        let (v, _) = gk15(&mut |t: f64| t.powi(6) - 3.0 * t.powi(3) + 1.0, -1.0, 2.0);
        let exact = (2f64.powi(7) + 1.0) / 7.0 - 0.75 * (16.0 - 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn exponential_and_by_parts() {
        let q = integrate(|t: f64| (-t).exp(), 0.0, 40.0, 1e-12).unwrap();
        assert!((q.value - (1.0 - (-40f64).exp())).abs() < 1e-12);
        let t = 7.3;
        let q = integrate(|s: f64| s * s.cos(), 0.0, t, 1e-11).unwrap();
        assert!((q.value - (t * t.sin() + t.cos() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn reversed_and_empty() {
        let q = integrate(|t: f64| t, 1.0, 0.0, 1e-12).unwrap();
        assert!((q.value + 0.5).abs() < 1e-15);
        assert_eq!(integrate(|_| 1.0, 3.0, 3.0, 1e-12).unwrap().value, 0.0);
        assert_eq!(integrate(|_| 0.0, -5.0, 9.0, 1e-12).unwrap().value, 0.0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let mut f = |t: f64| (1.0 / t).sin() / t;
        let r = integrate_with_budget(&mut f, 1e-6, 1.0, 1e-14, 8);
        assert!(matches!(r, Err(QuadError::ToleranceNotMet { intervals: 8, .. })));
    }

    #[test]
    fn vector_panel_matches_scalar() {
        let (v, e) = gk15_vec(&mut |t: f64| [t.sin(), t * t, 1.0], 0.0, 1.5);
        let (s, es) = gk15(&mut |t: f64| t.sin(), 0.0, 1.5);
        assert_eq!(v[0], s);
        assert!(e >= es);
        assert!((v[1] - 1.125).abs() < 1e-14 && (v[2] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn non_finite_integrand() {
        assert!(matches!(integrate(|t: f64| if t > 0.5 { f64::NAN } else { t }, 0.0, 1.0, 1e-8), Err(QuadError::NonFinite(_))));
    }
}
