//! Dense polynomials over a small ring abstraction.
//!
//! The ring is either plain complex numbers or polynomials in an auxiliary
//! unknown (the accessory parameter `q`), so the same recurrence code can run
//! numerically and symbolically.

use std::fmt::Debug;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numeric::{ONE, ZERO};

/// Commutative ring with a complex scalar action.
pub trait Ring: Clone + Debug + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, s: Complex64) -> Self;
    fn is_zero(&self) -> bool;
    /// Largest modulus of any scalar component.
    fn magnitude(&self) -> f64;
    /// Component-wise modulus, used to bound rounding error.
    fn abs_bound(&self) -> Self;
    /// Zero every component whose modulus is at most `rel` times the
    /// matching component of `bound`.
    fn snap(&self, bound: &Self, rel: f64) -> Self;
    fn from_scalar(s: Complex64) -> Self {
        Self::one().scale(s)
    }
    fn neg(&self) -> Self {
        self.scale(-ONE)
    }
}

impl Ring for Complex64 {
    fn zero() -> Self {
        ZERO
    }
    fn one() -> Self {
        ONE
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, s: Complex64) -> Self {
        self * s
    }
    fn is_zero(&self) -> bool {
        *self == ZERO
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn abs_bound(&self) -> Self {
        Complex64::new(self.norm(), 0.0)
    }
    fn snap(&self, bound: &Self, rel: f64) -> Self {
        if self.norm() <= rel * bound.norm() {
            ZERO
        } else {
            *self
        }
    }
}

/// Polynomial with coefficients in ascending degree order. Trailing exact
/// zeros are trimmed, so the zero polynomial has no coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

/// Polynomial with complex coefficients.
pub type Polynomial = Poly<Complex64>;

impl<T: Ring> Poly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// The polynomial `z`.
    pub fn identity() -> Self {
        Self::new(vec![T::zero(), T::one()])
    }

    /// `a0 + a1 z`.
    pub fn linear(a0: T, a1: T) -> Self {
        Self::new(vec![a0, a1])
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `z^i`, zero beyond the degree.
    pub fn coeff(&self, i: usize) -> T {
        self.coeffs.get(i).cloned().unwrap_or_else(T::zero)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i).add(&other.coeff(i))).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i).sub(&other.coeff(i))).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.scale(s)).collect())
    }

    /// Multiply every coefficient by a ring element.
    pub fn scale_ring(&self, s: &T) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.mul(s)).collect())
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, z: Complex64) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc.scale(z).add(c))
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c.scale(Complex64::new(i as f64, 0.0)))
                .collect(),
        )
    }

    /// Re-expand in powers of `w = z - z1` by repeated synthetic division.
    pub fn taylor_shift(&self, z1: Complex64) -> Self {
        Self::new(shift_coeffs(&self.coeffs, z1))
    }

    /// Taylor shift that also returns a component-wise bound on the terms
    /// combined into each output coefficient, for rounding-aware snapping.
    pub fn taylor_shift_with_bound(&self, z1: Complex64) -> (Vec<T>, Vec<T>) {
        let shifted = shift_coeffs(&self.coeffs, z1);
        let abs: Vec<T> = self.coeffs.iter().map(|c| c.abs_bound()).collect();
        let bound = shift_coeffs(&abs, Complex64::new(z1.norm(), 0.0));
        (shifted, bound)
    }
}

fn shift_coeffs<T: Ring>(coeffs: &[T], z1: Complex64) -> Vec<T> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for k in (i..n.saturating_sub(1)).rev() {
            let t = c[k + 1].scale(z1);
            c[k] = c[k].add(&t);
        }
    }
    c
}

impl<T: Ring> Ring for Poly<T> {
    fn zero() -> Self {
        Poly::zero()
    }
    fn one() -> Self {
        Poly::constant(T::one())
    }
    fn add(&self, other: &Self) -> Self {
        Poly::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        Poly::sub(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        Poly::mul(self, other)
    }
    fn scale(&self, s: Complex64) -> Self {
        Poly::scale(self, s)
    }
    fn is_zero(&self) -> bool {
        Poly::is_zero(self)
    }
    fn magnitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.magnitude()).fold(0.0, f64::max)
    }
    fn abs_bound(&self) -> Self {
        Poly {
            coeffs: self.coeffs.iter().map(|c| c.abs_bound()).collect(),
        }
    }
    fn snap(&self, bound: &Self, rel: f64) -> Self {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c.snap(&bound.coeff(i), rel))
                .collect(),
        )
    }
}

impl Polynomial {
    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots.iter().fold(Self::constant(ONE), |p, &r| {
            p.mul(&Self::linear(-r, ONE))
        })
    }

    /// Leading coefficient (zero for the zero polynomial).
    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    /// Divide by the leading coefficient.
    pub fn monic(&self) -> Self {
        let l = self.leading();
        if l == ZERO {
            self.clone()
        } else {
            self.scale(ONE / l)
        }
    }

    /// Polynomial long division, returning `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (Self::zero(), self.clone());
        }
        let mut quot = vec![ZERO; rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let f = rem[i + dd] / lead;
            quot[i] = f;
            for (k, d) in divisor.coeffs.iter().enumerate() {
                rem[i + k] -= f * d;
            }
            rem[i + dd] = ZERO;
        }
        rem.truncate(dd);
        (Self::new(quot), Self::new(rem))
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Σ |c_i| |z|^i`, the natural scale of `p(z)`.
    pub fn abs_eval(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * r + c.norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::c;

    #[test]
    fn shift_square() {
        let p = Polynomial::from_real(&[0.0, 0.0, 1.0]);
        let s = p.taylor_shift(ONE);
        assert_eq!(s.coeffs(), &[c(1.0), c(2.0), c(1.0)]);
    }

    #[test]
    fn shift_constant_unchanged() {
        let p = Polynomial::from_real(&[3.5]);
        assert_eq!(p.taylor_shift(Complex64::new(0.3, -2.0)), p);
    }

    #[test]
    fn shift_round_trip() {
        let p = Polynomial::new(vec![
            Complex64::new(0.3, 1.0),
            Complex64::new(-2.0, 0.5),
            Complex64::new(1.5, 0.0),
            Complex64::new(0.0, -0.7),
        ]);
        let z1 = Complex64::new(0.4, -0.9);
        let back = p.taylor_shift(z1).taylor_shift(-z1);
        for (a, b) in back.coeffs().iter().zip(p.coeffs()) {
            assert!((a - b).norm() <= 1e-13 * p.max_coeff());
        }
    }

    #[test]
    fn division_by_linear_factor() {
        let p = Polynomial::from_roots(&[c(2.0), c(-1.0), Complex64::new(0.5, 0.5)]);
        let (q, r) = p.div_rem(&Polynomial::linear(c(-2.0), ONE));
        assert!(r.max_coeff() < 1e-14);
        assert_eq!(q.degree(), Some(2));
        assert!(q.eval(c(-1.0)).norm() < 1e-14);
    }

    #[test]
    fn polynomial_ring_over_polynomials() {
        // (1 + q z)(1 - q z) = 1 - q^2 z^2
        let q = Polynomial::identity();
        let a = Poly::<Polynomial>::new(vec![Polynomial::one(), q.clone()]);
        let b = Poly::<Polynomial>::new(vec![Polynomial::one(), q.scale(-ONE)]);
        let p = a.mul(&b);
        assert_eq!(p.degree(), Some(2));
        assert!(p.coeff(1).is_zero());
        assert_eq!(p.coeff(2), Polynomial::from_real(&[0.0, 0.0, -1.0]));
    }
}
