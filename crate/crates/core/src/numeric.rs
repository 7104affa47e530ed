//! Small numeric helpers shared by the evaluators.

use num_complex::Complex64;

/// Complex scalar used throughout the crate.
pub type ComplexScalar = Complex64;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Returns `Some(n)` when `z == -n` for a non-negative integer `n`.
pub fn nonpositive_integer(z: Complex64) -> Option<u64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() && z.re > -1e15 {
        Some((-z.re) as u64)
    } else {
        None
    }
}

pub(crate) fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Principal-branch power `z^w`, with `0^w` defined for `Re w > 0` (and `0^0 = 1`).
pub fn cpow(z: Complex64, w: Complex64) -> Complex64 {
    if z == ZERO {
        if w == ZERO {
            ONE
        } else if w.re > 0.0 {
            ZERO
        } else {
            Complex64::new(f64::INFINITY, 0.0)
        }
    } else if w.im == 0.0 && w.re == w.re.round() && w.re.abs() <= 64.0 {
        z.powi(w.re as i32)
    } else {
        (w * z.ln()).exp()
    }
}

/// Integer power that stays exact for small exponents.
pub(crate) fn ipow(z: Complex64, n: usize) -> Complex64 {
    let mut acc = ONE;
    let mut base = z;
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    re: f64,
    im: f64,
    cre: f64,
    cim: f64,
}

#[inline]
fn two_sum_step(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, z: Complex64) {
        two_sum_step(&mut self.re, &mut self.cre, z.re);
        two_sum_step(&mut self.im, &mut self.cim, z.im);
    }

    pub(crate) fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.cre, self.im + self.cim)
    }
}

/// Relative distance `|a-b| / max(|a|,|b|)`, zero when both vanish.
pub fn rel_diff(a: Complex64, b: Complex64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}
