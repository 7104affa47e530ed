//! Local Frobenius analysis of a polynomial ODE `A v'' + B v' + C v = 0`:
//! indicial exponents and the banded recurrence for the series coefficients.
//!
//! After re-expanding `A`, `B`, `C` about the center `c` (`w = z - c`),
//! substituting `v = w^μ Σ aₙ wⁿ` and collecting powers gives
//!
//! `Σ_j K(n, j) a_{n-j} = 0`,
//! `K(n, j) = A_{j+e+2} k(k-1) + B_{j+e+1} k + C_{j+e}`, `k = n - j + μ`,
//!
//! where `e` is the lowest power of `w` that occurs. The relation couples
//! `bandwidth` consecutive coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heun::PolyOde;
use crate::numeric::{c, cpow, is_finite, CompensatedSum, ONE, ZERO};
use crate::poly::{Poly, Polynomial, Ring};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrobeniusError {
    #[error("center {0} is an irregular singular point")]
    IrregularPoint(Complex64),
    #[error("the leading polynomial vanishes identically")]
    DegenerateOde,
    #[error("μ = {mu} is not an indicial exponent at {center} (indicial value {value:e})")]
    NotAnExponent {
        center: Complex64,
        mu: Complex64,
        value: f64,
    },
    #[error("resonance at n = {n}: obstruction {obstruction:e} relative to scale {scale:e}")]
    Resonance { n: usize, obstruction: f64, scale: f64 },
    #[error("non-finite coefficient at n = {0}")]
    NonFinite(usize),
}

type Result<T> = std::result::Result<T, FrobeniusError>;

/// Relative size below which a shifted polynomial coefficient is treated as
/// an exact zero produced by cancellation.
pub const SNAP_TOL: f64 = 1e-13;
/// Leading coefficient counts as zero below this fraction of the row maximum.
pub const RESONANCE_TOL: f64 = 1e-12;
/// A resonant row is consistent when its remainder is below this fraction of
/// the running scale.
pub const OBSTRUCTION_TOL: f64 = 1e-10;
/// Tolerance of the indicial-root check in [`local_recurrence`].
pub const EXPONENT_TOL: f64 = 1e-9;

/// Re-expand `p` in powers of `w = z - z1`.
pub fn taylor_shift(p: &Polynomial, z1: Complex64) -> Polynomial {
    p.taylor_shift(z1)
}

/// The coefficients of an ODE re-expanded about a center, with rounding-level
/// leftovers snapped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedOde<T = Complex64> {
    pub center: Complex64,
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
}

fn shift_snapped<T: Ring>(p: &Poly<T>, center: Complex64) -> Vec<T> {
    let (s, bound) = p.taylor_shift_with_bound(center);
    let mut out: Vec<T> = s
        .iter()
        .zip(&bound)
        .map(|(x, b)| x.snap(b, SNAP_TOL))
        .collect();
    while out.last().is_some_and(|x| x.is_zero()) {
        out.pop();
    }
    out
}

pub fn shift_ode<T: Ring>(ode: &PolyOde<T>, center: Complex64) -> ShiftedOde<T> {
    ShiftedOde {
        center,
        a: shift_snapped(&ode.a, center),
        b: shift_snapped(&ode.b, center),
        c: shift_snapped(&ode.c, center),
    }
}

fn order<T: Ring>(v: &[T]) -> Option<usize> {
    v.iter().position(|x| !x.is_zero())
}

fn get<T: Ring>(v: &[T], i: i64) -> T {
    if i < 0 {
        T::zero()
    } else {
        v.get(i as usize).cloned().unwrap_or_else(T::zero)
    }
}

impl<T: Ring> ShiftedOde<T> {
    /// Lowest and highest powers of `w` in the substituted equation.
    pub fn layout(&self) -> Result<(i64, i64)> {
        let oa = order(&self.a).ok_or(FrobeniusError::DegenerateOde)? as i64;
        let ob = order(&self.b).map_or(i64::MAX, |o| o as i64 - 1);
        let oc = order(&self.c).map_or(i64::MAX, |o| o as i64);
        let e_min = (oa - 2).min(ob).min(oc);
        if oa - 2 > e_min {
            return Err(FrobeniusError::IrregularPoint(self.center));
        }
        let da = self.a.len() as i64 - 1;
        let db = self.b.len() as i64 - 1;
        let dc = self.c.len() as i64 - 1;
        let e_max = (da - 2).max(db - 1).max(dc);
        Ok((e_min, e_max))
    }
}

/// Banded recurrence `Σ_{j<bandwidth} K(n, j) a_{n-j} = 0` at a center.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRecurrence<T = Complex64> {
    pub center: Complex64,
    pub mu: Complex64,
    pub bandwidth: usize,
    /// Lowest power `e` of `w` in the substituted equation.
    pub lowest_power: i64,
    shifted: ShiftedOde<T>,
}

impl<T: Ring> LocalRecurrence<T> {
    /// Recurrence with an explicitly chosen window of powers, bypassing the
    /// structural layout. Coefficients outside the polynomials' support come
    /// out as exact zeros.
    pub fn from_layout(
        ode: &PolyOde<T>,
        center: Complex64,
        mu: Complex64,
        lowest_power: i64,
        bandwidth: usize,
    ) -> Self {
        LocalRecurrence {
            center,
            mu,
            bandwidth,
            lowest_power,
            shifted: shift_ode(ode, center),
        }
    }

    /// Structural recurrence without checking that `mu` is an exponent.
    pub fn unchecked(ode: &PolyOde<T>, center: Complex64, mu: Complex64) -> Result<Self> {
        let shifted = shift_ode(ode, center);
        let (e_min, e_max) = shifted.layout()?;
        Ok(LocalRecurrence {
            center,
            mu,
            bandwidth: (e_max - e_min + 1) as usize,
            lowest_power: e_min,
            shifted,
        })
    }

    /// `K(n, j)`, the coefficient of `a_{n-j}` in equation `n`.
    pub fn coeff(&self, n: usize, j: usize) -> T {
        let k = c((n as f64) - (j as f64)) + self.mu;
        let p = j as i64 + self.lowest_power;
        let a = get(&self.shifted.a, p + 2).scale(k * (k - ONE));
        let b = get(&self.shifted.b, p + 1).scale(k);
        let cc = get(&self.shifted.c, p);
        a.add(&b).add(&cc)
    }

    /// All `bandwidth` coefficients of equation `n` (offsets past `n` included).
    pub fn row(&self, n: usize) -> Vec<T> {
        (0..self.bandwidth).map(|j| self.coeff(n, j)).collect()
    }

    pub fn shifted(&self) -> &ShiftedOde<T> {
        &self.shifted
    }
}

/// Indicial exponents at `center`: `{0, 1}` at an ordinary point, otherwise
/// the roots of `A_{e+2} μ(μ-1) + B_{e+1} μ + C_e`. A zero root is listed first.
pub fn indicial_exponents(ode: &PolyOde, center: Complex64) -> Result<(Complex64, Complex64)> {
    let s = shift_ode(ode, center);
    let (e, _) = s.layout()?;
    if e == -2 {
        return Ok((ZERO, ONE));
    }
    let a = get(&s.a, e + 2);
    let b = get(&s.b, e + 1) - a;
    let cc = get(&s.c, e);
    if cc == ZERO {
        return Ok((ZERO, -b / a));
    }
    let disc = (b * b - 4.0 * a * cc).sqrt();
    let r1 = if (-b + disc).norm() >= (-b - disc).norm() {
        (-b + disc) / (2.0 * a)
    } else {
        (-b - disc) / (2.0 * a)
    };
    let r2 = if r1 == ZERO { ZERO } else { cc / (a * r1) };
    if (r1.re, r1.im) <= (r2.re, r2.im) {
        Ok((r1, r2))
    } else {
        Ok((r2, r1))
    }
}

/// Banded recurrence for the exponent `mu` at `center`.
pub fn local_recurrence(
    ode: &PolyOde,
    center: Complex64,
    mu: Complex64,
) -> Result<LocalRecurrence> {
    let rec = LocalRecurrence::unchecked(ode, center, mu)?;
    let value = rec.coeff(0, 0);
    let s = &rec.shifted;
    let e = rec.lowest_power;
    let scale = get(&s.a, e + 2).norm() * (mu * (mu - ONE)).norm()
        + get(&s.b, e + 1).norm() * mu.norm()
        + get(&s.c, e).norm();
    if value.norm() > EXPONENT_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(FrobeniusError::NotAnExponent {
            center,
            mu,
            value: value.norm(),
        });
    }
    Ok(rec)
}

/// Truncated local solution `v = (z-c)^μ Σ aₙ (z-c)ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSeries {
    pub center: Complex64,
    pub mu: Complex64,
    pub coeffs: Vec<Complex64>,
}

/// Solve the recurrence forward for `a₁ … a_{n_max}` with `a₀ = 1`.
///
/// At a resonant index (vanishing leading coefficient) the remaining terms
/// must cancel; the free coefficient is then set to zero.
pub fn run_recurrence(rec: &LocalRecurrence, n_max: usize) -> Result<LocalSeries> {
    let mut a = Vec::with_capacity(n_max + 1);
    a.push(ONE);
    for n in 1..=n_max {
        let row = rec.row(n);
        let mut rhs = CompensatedSum::new();
        let mut scale = 0.0f64;
        for (j, k) in row.iter().enumerate().skip(1) {
            if j > n {
                break;
            }
            let t = k * a[n - j];
            rhs.add(t);
            scale += t.norm();
        }
        let rhs = -rhs.value();
        let lead = row[0];
        let row_max = row.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let next = if lead.norm() <= RESONANCE_TOL * row_max {
            if rhs.norm() > OBSTRUCTION_TOL * scale.max(f64::MIN_POSITIVE) && rhs != ZERO {
                return Err(FrobeniusError::Resonance {
                    n,
                    obstruction: rhs.norm(),
                    scale,
                });
            }
            ZERO
        } else {
            rhs / lead
        };
        if !is_finite(next) {
            return Err(FrobeniusError::NonFinite(n));
        }
        a.push(next);
    }
    Ok(LocalSeries {
        center: rec.center,
        mu: rec.mu,
        coeffs: a,
    })
}

impl LocalSeries {
    /// `v`, `v'`, `v''` of the truncated series at `z`.
    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let w = z - self.center;
        let mut s = ZERO;
        let mut ds = ZERO;
        let mut d2s = ZERO;
        for &a in self.coeffs.iter().rev() {
            d2s = d2s * w + ds * 2.0;
            ds = ds * w + s;
            s = s * w + a;
        }
        let mu = self.mu;
        if mu == ZERO {
            return (s, ds, d2s);
        }
        let wm = cpow(w, mu);
        if w == ZERO {
            return (wm * s, ZERO, ZERO);
        }
        let wm1 = wm / w;
        let wm2 = wm1 / w;
        (
            wm * s,
            mu * wm1 * s + wm * ds,
            mu * (mu - ONE) * wm2 * s + 2.0 * mu * wm1 * ds + wm * d2s,
        )
    }

    /// `|aₙ| |z-c|ⁿ` for every retained coefficient.
    pub fn term_magnitudes(&self, z: Complex64) -> Vec<f64> {
        let r = (z - self.center).norm();
        let mut p = 1.0;
        self.coeffs
            .iter()
            .map(|a| {
                let t = a.norm() * p;
                p *= r;
                t
            })
            .collect()
    }
}
