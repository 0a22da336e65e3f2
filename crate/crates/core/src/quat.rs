//! Quaternion arithmetic and the 4×4 real symbol representation.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norm below which a quaternion is treated as a singular divisor.
pub const EPS_ZERO: f64 = 1e-12;

/// Absolute tolerance used by [`SymbolMatrix::unsymbol`] when validating the sign pattern.
pub const SYMBOL_PATTERN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuatError {
    #[error("near-zero divisor (|q| = {0:e})")]
    NearZeroDivisor(f64),
    #[error("matrix is not a quaternion symbol: entry ({row},{col}) off by {deviation:e}")]
    NotASymbol { row: usize, col: usize, deviation: f64 },
}

/// `q = q0 + i q1 + j q2 + k q3`.
///
/// Serialized as a bare `[q0, q1, q2, q3]` array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl From<[f64; 4]> for Quaternion {
    fn from(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl From<f64> for Quaternion {
    fn from(re: f64) -> Self {
        Self::real(re)
    }
}

impl Quaternion {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self { q0, q1, q2, q3 }
    }

    pub const fn real(re: f64) -> Self {
        Self::new(re, 0.0, 0.0, 0.0)
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn write_to(&self, s: &mut [f64]) {
        s[..4].copy_from_slice(&self.to_array());
    }

    pub const fn to_array(&self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    pub fn component(&self, n: usize) -> f64 {
        self.to_array()[n]
    }

    #[inline]
    pub fn re(&self) -> f64 {
        self.q0
    }

    #[inline]
    pub fn im(&self) -> Self {
        Self::new(0.0, self.q1, self.q2, self.q3)
    }

    #[inline]
    pub fn conj(&self) -> Self {
        Self::new(self.q0, -self.q1, -self.q2, -self.q3)
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.q0 * self.q0 + self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// `conj(q) / |q|²`, refusing divisors with `|q| <= EPS_ZERO`.
    pub fn inverse(&self) -> Result<Self, QuatError> {
        let n = self.norm();
        if n <= EPS_ZERO {
            return Err(QuatError::NearZeroDivisor(n));
        }
        Ok(self.conj() * (1.0 / self.norm_sq()))
    }

    /// `conj(q) / |q|²` without a zero guard; non-finite for `q = 0`.
    pub fn recip(&self) -> Self {
        self.conj() * (1.0 / self.norm_sq())
    }

    /// Max-abs componentwise distance.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other)
            .to_array()
            .iter()
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn symbol(&self) -> SymbolMatrix {
        SymbolMatrix::of(self)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:+}i {:+}j {:+}k",
            self.q0, self.q1, self.q2, self.q3
        )
    }
}

impl Add for Quaternion {
    type Output = Self;
    #[inline]
    fn add(self, r: Self) -> Self {
        Self::new(self.q0 + r.q0, self.q1 + r.q1, self.q2 + r.q2, self.q3 + r.q3)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, r: Self) {
        *self = *self + r;
    }
}

impl Sub for Quaternion {
    type Output = Self;
    #[inline]
    fn sub(self, r: Self) -> Self {
        Self::new(self.q0 - r.q0, self.q1 - r.q1, self.q2 - r.q2, self.q3 - r.q3)
    }
}

impl SubAssign for Quaternion {
    fn sub_assign(&mut self, r: Self) {
        *self = *self - r;
    }
}

impl Neg for Quaternion {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.q0, -self.q1, -self.q2, -self.q3)
    }
}

/// Hamilton product: `i² = j² = k² = ijk = −1`, `ij = −ji = k`.
impl Mul for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, r: Self) -> Self {
        let (a1, b1, c1, d1) = (self.q0, self.q1, self.q2, self.q3);
        let (a2, b2, c2, d2) = (r.q0, r.q1, r.q2, r.q3);
        Self::new(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )
    }
}

impl MulAssign for Quaternion {
    fn mul_assign(&mut self, r: Self) {
        *self = *self * r;
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.q0 * s, self.q1 * s, self.q2 * s, self.q3 * s)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    #[inline]
    fn mul(self, q: Quaternion) -> Quaternion {
        q * self
    }
}

impl Div<f64> for Quaternion {
    type Output = Self;
    #[inline]
    fn div(self, s: f64) -> Self {
        self * (1.0 / s)
    }
}

pub fn mul(p: Quaternion, q: Quaternion) -> Quaternion {
    p * q
}

pub fn inverse(q: Quaternion) -> Result<Quaternion, QuatError> {
    q.inverse()
}

/// The real 4×4 matrix image of a quaternion. Rows are
/// `(q0, q1, q2, −q3)`, `(−q1, q0, −q3, −q2)`, `(−q2, q3, q0, q1)`, `(q3, q2, −q1, q0)`;
/// the map is an injective algebra homomorphism.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolMatrix(pub Matrix4<f64>);

impl SymbolMatrix {
    pub fn of(q: &Quaternion) -> Self {
        let (q0, q1, q2, q3) = (q.q0, q.q1, q.q2, q.q3);
        #[rustfmt::skip]
        let m = Matrix4::new(
             q0,  q1,  q2, -q3,
            -q1,  q0, -q3, -q2,
            -q2,  q3,  q0,  q1,
             q3,  q2, -q1,  q0,
        );
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Reads `q` off the first row and checks the other twelve entries against the pattern.
    pub fn unsymbol(m: &Matrix4<f64>) -> Result<Quaternion, QuatError> {
        let q = Quaternion::new(m[(0, 0)], m[(0, 1)], m[(0, 2)], -m[(0, 3)]);
        let expected = Self::of(&q).0;
        for row in 1..4 {
            for col in 0..4 {
                let deviation = (m[(row, col)] - expected[(row, col)]).abs();
                if !(deviation <= SYMBOL_PATTERN_TOL) {
                    return Err(QuatError::NotASymbol { row, col, deviation });
                }
            }
        }
        Ok(q)
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

pub fn symbol(q: Quaternion) -> SymbolMatrix {
    SymbolMatrix::of(&q)
}

pub fn unsymbol(m: &SymbolMatrix) -> Result<Quaternion, QuatError> {
    SymbolMatrix::unsymbol(&m.0)
}

/// `(det symbol(q), tr symbol(q))`; these should equal `|q|⁴` and `4 re q`.
pub fn lemma21_check(q: Quaternion) -> (f64, f64) {
    let s = q.symbol();
    (s.determinant(), s.trace())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Laplace expansion along the first row; independent of nalgebra's LU.
    fn cofactor_det(m: &[[f64; 4]; 4]) -> f64 {
        fn det3(a: [[f64; 3]; 3]) -> f64 {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
        let mut det = 0.0;
        for col in 0..4 {
            let mut minor = [[0.0; 3]; 3];
            for r in 1..4 {
                let mut cc = 0;
                for c in 0..4 {
                    if c != col {
                        minor[r - 1][cc] = m[r][c];
                        cc += 1;
                    }
                }
            }
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * m[0][col] * det3(minor);
        }
        det
    }

    fn rows(s: &SymbolMatrix) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = s.0[(r, c)];
            }
        }
        out
    }

    #[test]
    fn unit_products() {
        use Quaternion as Q;
        assert_eq!(Q::I * Q::J, Q::K);
        assert_eq!(Q::J * Q::I, -Q::K);
        assert_eq!(Q::J * Q::K, Q::I);
        assert_eq!(Q::K * Q::I, Q::J);
        assert_eq!(Q::I * Q::I, -Q::ONE);
        assert_eq!(Q::I * Q::J * Q::K, -Q::ONE);
        let q = Q::new(0.3, -1.2, 2.5, 7.0);
        assert_eq!(Q::ONE * q, q);
        assert_eq!(q * Q::ONE, q);
        assert_eq!(Q::new(1.0, 1.0, 0.0, 0.0) * Q::new(1.0, -1.0, 0.0, 0.0), Q::real(2.0));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Quaternion::real(2.0).inverse().unwrap(), Quaternion::real(0.5));
        assert_eq!(Quaternion::I.inverse().unwrap(), -Quaternion::I);
        let q = Quaternion::new(1.0, 1.0, 1.0, 1.0).inverse().unwrap();
        assert!(q.max_abs_diff(&Quaternion::new(0.25, -0.25, -0.25, -0.25)) < 1e-16);
        assert!(matches!(
            Quaternion::new(1e-13, 0.0, 0.0, 0.0).inverse(),
            Err(QuatError::NearZeroDivisor(_))
        ));
        assert!(Quaternion::ZERO.inverse().is_err());
    }

    #[test]
    fn symbol_layout() {
        assert_eq!(Quaternion::ONE.symbol().0, Matrix4::identity());
        #[rustfmt::skip]
        let i_sym = Matrix4::new(
             0.0, 1.0, 0.0, 0.0,
            -1.0, 0.0, 0.0, 0.0,
             0.0, 0.0, 0.0, 1.0,
             0.0, 0.0,-1.0, 0.0,
        );
        assert_eq!(Quaternion::I.symbol().0, i_sym);
        let q = Quaternion::new(1.0, 1.0, 1.0, 1.0);
        assert!((cofactor_det(&rows(&q.symbol())) - 16.0).abs() < 1e-12);
        assert!((q.symbol().determinant() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn determinant_and_trace_examples() {
        assert_eq!(lemma21_check(Quaternion::ZERO), (0.0, 0.0));
        let (d, t) = lemma21_check(Quaternion::real(2.0));
        assert!((d - 16.0).abs() < 1e-12 && t == 8.0);
        let q = Quaternion::new(1.0, 2.0, 2.0, 0.0);
        let oracle = cofactor_det(&rows(&q.symbol()));
        assert!((oracle - 81.0).abs() < 1e-12);
        let (d, t) = lemma21_check(q);
        assert!((d - oracle).abs() < 1e-10);
        assert_eq!(t, 4.0);
    }

    #[test]
    fn unsymbol_round_trip_and_rejection() {
        let q = Quaternion::new(0.5, -2.0, 3.25, 1.5);
        assert_eq!(unsymbol(&q.symbol()).unwrap(), q);
        let mut m = q.symbol().0;
        m[(2, 3)] += 1e-6;
        assert!(matches!(
            SymbolMatrix::unsymbol(&m),
            Err(QuatError::NotASymbol { row: 2, col: 3, .. })
        ));
        let mut m = q.symbol().0;
        m[(3, 1)] += 1e-11;
        assert!(SymbolMatrix::unsymbol(&m).is_ok());
    }

    #[test]
    fn re_im_reconstruct() {
        let q = Quaternion::new(-1.5, 2.0, 0.25, 9.0);
        assert_eq!(Quaternion::real(q.re()) + q.im(), q);
    }

    #[test]
    fn serde_as_array() {
        let q: Quaternion = serde_json::from_str("[0,1,0,0]").unwrap();
        assert_eq!(q, Quaternion::I);
        assert_eq!(serde_json::to_string(&q).unwrap(), "[0.0,1.0,0.0,0.0]");
    }
}
