//! The confluent Heun equation
//!
//! `u'' + (γ/z + δ/(z-1) + ε) u' + (αz - q)/(z(z-1)) u = 0`,
//!
//! its two reference solvers (a Frobenius series at the origin and an adaptive
//! Runge-Kutta path integrator), and the auxiliary polynomial ODEs satisfied by
//! `v = z^γ (z-1)^δ u'` and by the analogous function built from
//! `w = e^{εz/2} u`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{c, cpow, is_finite, nonpositive_integer, ONE, ZERO};
use crate::poly::{Poly, Polynomial, Ring};
use crate::special::SeriesDiagnostics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeunError {
    #[error("logarithmic case: exponent {0} gives an indicial degeneracy")]
    IndicialDegeneracy(Complex64),
    #[error("|z| = {0} is outside the unit disc of the origin series")]
    OutsideRadius(f64),
    #[error("series not converged after {terms} terms (last term {last:e})")]
    NoConvergence { terms: usize, last: f64 },
    #[error("path passes within {distance:e} of the singular point {point}")]
    PathTooCloseToSingularity { point: f64, distance: f64 },
    #[error("integrator step size underflow near z = {0}")]
    StepUnderflow(Complex64),
    #[error("z = {0} is a singular point of the equation")]
    AtSingularity(Complex64),
    #[error("α = 0: the auxiliary equation needs z₀ = q/α")]
    AlphaZero,
    #[error("ε = 0: the exponential substitution is trivial")]
    EpsilonZero,
    #[error("z = {0} lies on a branch cut of z^γ (z-1)^δ")]
    BranchAmbiguity(Complex64),
    #[error("non-finite value encountered")]
    NonFinite,
}

type Result<T> = std::result::Result<T, HeunError>;

/// The five parameters of the equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeunParams {
    pub gamma: Complex64,
    pub delta: Complex64,
    pub epsilon: Complex64,
    pub alpha: Complex64,
    pub q: Complex64,
}

impl HeunParams {
    pub fn new(
        gamma: Complex64,
        delta: Complex64,
        epsilon: Complex64,
        alpha: Complex64,
        q: Complex64,
    ) -> Self {
        HeunParams {
            gamma,
            delta,
            epsilon,
            alpha,
            q,
        }
    }

    pub fn real(gamma: f64, delta: f64, epsilon: f64, alpha: f64, q: f64) -> Self {
        Self::new(c(gamma), c(delta), c(epsilon), c(alpha), c(q))
    }

    /// The extra singular point `z₀ = q/α` of the auxiliary equation.
    pub fn z0(&self) -> Option<Complex64> {
        (self.alpha != ZERO).then(|| self.q / self.alpha)
    }

    pub fn is_finite(&self) -> bool {
        [self.gamma, self.delta, self.epsilon, self.alpha, self.q]
            .iter()
            .all(|&z| is_finite(z))
    }

    /// Coefficients `p(z)` and `Q(z)` of `u'' + p u' + Q u = 0`.
    pub fn coefficients(&self, z: Complex64) -> (Complex64, Complex64) {
        let p = self.gamma / z + self.delta / (z - ONE) + self.epsilon;
        let q = (self.alpha * z - self.q) / (z * (z - ONE));
        (p, q)
    }
}

/// `A v'' + B v' + C v = 0` with polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PolyOde<T = Complex64> {
    pub a: Poly<T>,
    pub b: Poly<T>,
    pub c: Poly<T>,
}

impl PolyOde<Complex64> {
    /// `A v'' + B v' + C v` at a point.
    pub fn residual(&self, z: Complex64, v: Complex64, dv: Complex64, d2v: Complex64) -> Complex64 {
        self.a.eval(z) * d2v + self.b.eval(z) * dv + self.c.eval(z) * v
    }

    /// `|A| |v''| + |B| |v'| + |C| |v|`, the scale of [`PolyOde::residual`].
    pub fn residual_scale(
        &self,
        z: Complex64,
        v: Complex64,
        dv: Complex64,
        d2v: Complex64,
    ) -> f64 {
        self.a.eval(z).norm() * d2v.norm()
            + self.b.eval(z).norm() * dv.norm()
            + self.c.eval(z).norm() * v.norm()
    }
}

fn lin<R: Ring>(a0: R, a1: R) -> Poly<R> {
    Poly::linear(a0, a1)
}

fn scalar<R: Ring>(s: Complex64) -> R {
    R::from_scalar(s)
}

/// Auxiliary equation for `v = z^γ (z-1)^δ u'`, multiplied through by
/// `α z (z-1)(z - z₀)` so that every coefficient is polynomial in `α` and `q`:
///
/// `A = z(z-1)(αz - q)`,
/// `B = (1-γ)(z-1)(αz-q) + (1-δ)z(αz-q) + εz(z-1)(αz-q) - αz(z-1)`,
/// `C = αΠ(z)`.
///
/// The accessory parameter is passed as a ring element so the same builder
/// serves numeric evaluation and polynomial-in-`q` propagation.
pub fn eq3_scaled_generic<R: Ring>(
    gamma: Complex64,
    delta: Complex64,
    epsilon: Complex64,
    alpha: Complex64,
    q: R,
) -> PolyOde<R> {
    let z: Poly<R> = Poly::identity();
    let zm1: Poly<R> = lin(scalar(-ONE), R::one());
    let lz = lin(q.neg(), scalar(alpha)); // αz - q
    let z_zm1 = z.mul(&zm1);
    let a = z_zm1.mul(&lz);
    let b = zm1
        .mul(&lz)
        .scale(ONE - gamma)
        .add(&z.mul(&lz).scale(ONE - delta))
        .add(&a.scale(epsilon))
        .sub(&z_zm1.scale(alpha));
    // αΠ = α(α - (δ+γ-1)ε) z² + (αγε - q(2α + ε(2-δ-γ))) z + q(q + ε(1-γ))
    let c2: R = scalar(alpha * (alpha - (delta + gamma - ONE) * epsilon));
    let c1: R = scalar::<R>(alpha * gamma * epsilon)
        .sub(&q.scale(c(2.0) * alpha + epsilon * (c(2.0) - delta - gamma)));
    let c0: R = q.mul(&q.add(&scalar(epsilon * (ONE - gamma))));
    let cc = Poly::new(vec![c0, c1, c2]);
    PolyOde { a, b, c: cc }
}

/// Auxiliary equation satisfied by `v = z^γ (z-1)^δ u'` in the cleared form
/// `A = z(z-1)(z-z₀)`, `B = (1-γ)(z-1)(z-z₀) + (1-δ)z(z-z₀) + εz(z-1)(z-z₀) - z(z-1)`,
/// `C = Π(z)`, with `z₀ = q/α`.
pub fn build_eq3(params: &HeunParams) -> Result<PolyOde> {
    let z0 = params.z0().ok_or(HeunError::AlphaZero)?;
    let HeunParams {
        gamma: g,
        delta: d,
        epsilon: e,
        alpha: al,
        ..
    } = *params;
    let z = Polynomial::identity();
    let zm1 = Polynomial::linear(-ONE, ONE);
    let zz0 = Polynomial::linear(-z0, ONE);
    let z_zm1 = z.mul(&zm1);
    let a = z_zm1.mul(&zz0);
    let b = zm1
        .mul(&zz0)
        .scale(ONE - g)
        .add(&z.mul(&zz0).scale(ONE - d))
        .add(&a.scale(e))
        .sub(&z_zm1);
    let cc = Polynomial::new(vec![
        z0 * (z0 * al + e - g * e),
        g * e - z0 * (c(2.0) * al + e * (c(2.0) - d - g)),
        al - (d + g - ONE) * e,
    ]);
    Ok(PolyOde { a, b, c: cc })
}

/// [`build_eq3`] multiplied by `α`; stays valid (and polynomial in `q`) at `α = 0`.
pub fn build_eq3_scaled(params: &HeunParams) -> PolyOde {
    eq3_scaled_generic(
        params.gamma,
        params.delta,
        params.epsilon,
        params.alpha,
        params.q,
    )
}

/// `Π(z)` of the equation for `w = e^{εz/2} u`:
/// `w'' + (γ/z + δ/(z-1)) w' + Π(z)/(z(z-1)) w = 0`.
pub fn eq22_pi(params: &HeunParams) -> Polynomial {
    let HeunParams {
        gamma: g,
        delta: d,
        epsilon: e,
        alpha: al,
        q,
    } = *params;
    Polynomial::new(vec![
        (c(2.0) * g * e - c(4.0) * q) / 4.0,
        (c(4.0) * al - c(2.0) * (g + d) * e + e * e) / 4.0,
        -e * e / 4.0,
    ])
}

/// Auxiliary equation for `v = z^γ (z-1)^δ w'` with `w = e^{εz/2} u`, cleared
/// as `A = z(z-1)(z-z₁)(z-z₂)`,
/// `B = (1-γ)(z-1)(z-z₁)(z-z₂) + (1-δ)z(z-z₁)(z-z₂) - z(z-1)(z-z₂) - z(z-1)(z-z₁)`,
/// `C = p₀ (z-z₁)²(z-z₂)²`, `p₀ = -ε²/4`, where `Π = p₀(z-z₁)(z-z₂)`.
///
/// The symmetric functions of `z₁, z₂` are taken from `Π` directly, so the
/// leading coefficient of `C` is exactly `p₀`.
pub fn build_eq25(params: &HeunParams) -> Result<(PolyOde, Complex64, Complex64)> {
    let e = params.epsilon;
    if e == ZERO {
        return Err(HeunError::EpsilonZero);
    }
    let pi = eq22_pi(params);
    let p0 = -e * e / 4.0;
    let sum = -pi.coeff(1) / p0;
    let prod = pi.coeff(0) / p0;
    let (z1, z2) = quadratic_roots(sum, prod);
    // P(z) = (z - z₁)(z - z₂), P'(z) = 2z - (z₁ + z₂)
    let p = Polynomial::new(vec![prod, -sum, ONE]);
    let dp = Polynomial::new(vec![-sum, c(2.0)]);
    let z = Polynomial::identity();
    let zm1 = Polynomial::linear(-ONE, ONE);
    let z_zm1 = z.mul(&zm1);
    let a = z_zm1.mul(&p);
    let b = zm1
        .mul(&p)
        .scale(ONE - params.gamma)
        .add(&z.mul(&p).scale(ONE - params.delta))
        .sub(&z_zm1.mul(&dp));
    let cc = p.mul(&p).scale(p0);
    Ok((PolyOde { a, b, c: cc }, z1, z2))
}

/// Roots of `z² - s z + p`, computed without cancellation.
fn quadratic_roots(s: Complex64, p: Complex64) -> (Complex64, Complex64) {
    let disc = (s * s - 4.0 * p).sqrt();
    let big = if (s + disc).norm() >= (s - disc).norm() {
        (s + disc) / 2.0
    } else {
        (s - disc) / 2.0
    };
    if big == ZERO {
        return (ZERO, ZERO);
    }
    let small = p / big;
    if big.re < small.re || (big.re == small.re && big.im < small.im) {
        (big, small)
    } else {
        (small, big)
    }
}

/// Local solution choice at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentChoice {
    Zero,
    OneMinusGamma,
}

/// Frobenius solution `u = z^ρ Σ cₖ zᵏ` of the equation at `z = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub params: HeunParams,
    pub exponent: Complex64,
    pub coeffs: Vec<Complex64>,
}

/// Value and derivatives of an oracle solution at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub u: Complex64,
    pub du: Complex64,
    pub d2u: Complex64,
    pub diagnostics: SeriesDiagnostics,
}

/// Frobenius series at the origin from the three-term recurrence
///
/// `(m+ρ)(m+ρ-1+γ) c_m = [(m-1+ρ)(m+ρ-2+γ+δ-ε) - q] c_{m-1} + [ε(m-2+ρ) + α] c_{m-2}`
///
/// with `c₀ = 1`.
pub fn frobenius_heun(
    params: &HeunParams,
    choice: ExponentChoice,
    n_terms: usize,
) -> Result<OracleSolution> {
    let HeunParams {
        gamma: g,
        delta: d,
        epsilon: e,
        alpha: al,
        q,
    } = *params;
    if !params.is_finite() {
        return Err(HeunError::NonFinite);
    }
    let rho = match choice {
        ExponentChoice::Zero => {
            if nonpositive_integer(g).is_some() {
                return Err(HeunError::IndicialDegeneracy(ZERO));
            }
            ZERO
        }
        ExponentChoice::OneMinusGamma => {
            if nonpositive_integer(c(2.0) - g).is_some() || g == ONE {
                return Err(HeunError::IndicialDegeneracy(ONE - g));
            }
            ONE - g
        }
    };
    let n = n_terms.max(1);
    let mut coeffs = Vec::with_capacity(n);
    coeffs.push(ONE);
    for m in 1..n {
        let mf = m as f64;
        let prev = coeffs[m - 1];
        let prev2 = if m >= 2 { coeffs[m - 2] } else { ZERO };
        let num = ((mf - 1.0 + rho) * (rho + mf - 2.0 + g + d - e) - q) * prev
            + (e * (mf - 2.0 + rho) + al) * prev2;
        let den = (mf + rho) * (mf + rho - 1.0 + g);
        coeffs.push(num / den);
    }
    if coeffs.iter().any(|&x| !is_finite(x)) {
        return Err(HeunError::NonFinite);
    }
    Ok(OracleSolution {
        params: *params,
        exponent: rho,
        coeffs,
    })
}

/// Relative size of the last retained term that counts as converged.
const ORACLE_TAIL_TOL: f64 = 1e-14;

/// Evaluate a truncated oracle series with its first two derivatives.
pub fn eval_oracle(sol: &OracleSolution, z: Complex64) -> Result<OracleValue> {
    let r = z.norm();
    if r >= 1.0 {
        return Err(HeunError::OutsideRadius(r));
    }
    let n = sol.coeffs.len();
    // S, S', S'' by Horner
    let mut s = ZERO;
    let mut ds = ZERO;
    let mut d2s = ZERO;
    for &a in sol.coeffs.iter().rev() {
        d2s = d2s * z + ds * 2.0;
        ds = ds * z + s;
        s = s * z + a;
    }
    let last = sol.coeffs[n - 1].norm() * r.powi(n as i32 - 1);
    let prev = if n >= 2 {
        sol.coeffs[n - 2].norm() * r.powi(n as i32 - 2)
    } else {
        0.0
    };
    let scale = sol
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm() * r.powi(k as i32))
        .fold(0.0, f64::max);
    let converged = last.max(prev) <= ORACLE_TAIL_TOL * scale;
    if !converged {
        return Err(HeunError::NoConvergence {
            terms: n,
            last: last.max(prev),
        });
    }
    let rho = sol.exponent;
    let (u, du, d2u) = if rho == ZERO {
        (s, ds, d2s)
    } else {
        if z == ZERO {
            let u = if rho.re > 0.0 { ZERO } else { Complex64::new(f64::INFINITY, 0.0) };
            return Ok(OracleValue {
                u,
                du: Complex64::new(f64::NAN, 0.0),
                d2u: Complex64::new(f64::NAN, 0.0),
                diagnostics: SeriesDiagnostics {
                    terms_used: n,
                    last_term_magnitude: last,
                    converged,
                },
            });
        }
        let zr = cpow(z, rho);
        let zr1 = zr / z;
        let zr2 = zr1 / z;
        (
            zr * s,
            rho * zr1 * s + zr * ds,
            rho * (rho - 1.0) * zr2 * s + 2.0 * rho * zr1 * ds + zr * d2s,
        )
    };
    Ok(OracleValue {
        u,
        du,
        d2u,
        diagnostics: SeriesDiagnostics {
            terms_used: n,
            last_term_magnitude: last,
            converged,
        },
    })
}

/// `d2u + (γ/z + δ/(z-1) + ε) du + (αz - q)/(z(z-1)) u`.
pub fn heun_residual(
    params: &HeunParams,
    z: Complex64,
    u: Complex64,
    du: Complex64,
    d2u: Complex64,
) -> Result<Complex64> {
    if z == ZERO || z == ONE {
        return Err(HeunError::AtSingularity(z));
    }
    let (p, q) = params.coefficients(z);
    Ok(d2u + p * du + q * u)
}

/// `|d2u| + |p du| + |Q u|`, the natural scale of [`heun_residual`].
pub fn heun_residual_scale(
    params: &HeunParams,
    z: Complex64,
    u: Complex64,
    du: Complex64,
    d2u: Complex64,
) -> f64 {
    let (p, q) = params.coefficients(z);
    d2u.norm() + (p * du).norm() + (q * u).norm()
}

/// `z^γ (z-1)^δ du` with principal branches.
///
/// On the interval `0 < z < 1` the factor `(z-1)^δ` is taken on the upper
/// edge of its cut (`arg(z-1) = π`) regardless of the sign of a zero
/// imaginary part. Points of the negative real axis, where `z^γ` is cut as
/// well, are rejected when an exponent is not an integer.
pub fn v_from_u(params: &HeunParams, z: Complex64, du: Complex64) -> Result<Complex64> {
    if du == ZERO {
        return Ok(ZERO);
    }
    let g = params.gamma;
    let d = params.delta;
    let int = |x: Complex64| x.im == 0.0 && x.re == x.re.round();
    if z.im == 0.0 && z.re < 0.0 && !(int(g) && int(d)) {
        return Err(HeunError::BranchAmbiguity(z));
    }
    let z = Complex64::new(z.re, if z.im == 0.0 { 0.0 } else { z.im });
    let v = cpow(z, g) * cpow(z - ONE, d) * du;
    if is_finite(v) {
        Ok(v)
    } else {
        Err(HeunError::NonFinite)
    }
}

// ---------------------------------------------------------------------------
// Path integrator

/// A point of an integrated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub z: Complex64,
    pub u: Complex64,
    pub du: Complex64,
}

/// Tolerances of the adaptive Dormand-Prince integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub min_clearance: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-13,
            atol: 1e-15,
            min_clearance: 1e-3,
            max_steps: 2_000_000,
        }
    }
}

/// Integrate the equation along straight segments joining `path`, starting
/// from `(u, u')` at `path[0]`; returns the state at every waypoint.
pub fn integrate_heun(
    params: &HeunParams,
    path: &[Complex64],
    init: (Complex64, Complex64),
) -> Result<Vec<PathPoint>> {
    integrate_heun_with(&IntegratorConfig::default(), params, path, init)
}

pub fn integrate_heun_with(
    cfg: &IntegratorConfig,
    params: &HeunParams,
    path: &[Complex64],
    init: (Complex64, Complex64),
) -> Result<Vec<PathPoint>> {
    if path.is_empty() {
        return Ok(Vec::new());
    }
    for w in path.windows(2) {
        for s in [0.0, 1.0] {
            let d = segment_distance(w[0], w[1], c(s));
            if d < cfg.min_clearance {
                return Err(HeunError::PathTooCloseToSingularity { point: s, distance: d });
            }
        }
    }
    if path.len() == 1 {
        for s in [0.0, 1.0] {
            let d = (path[0] - s).norm();
            if d < cfg.min_clearance {
                return Err(HeunError::PathTooCloseToSingularity { point: s, distance: d });
            }
        }
    }
    let mut out = Vec::with_capacity(path.len());
    let mut y = [init.0, init.1];
    out.push(PathPoint {
        z: path[0],
        u: y[0],
        du: y[1],
    });
    for w in path.windows(2) {
        y = integrate_segment(cfg, params, w[0], w[1], y)?;
        out.push(PathPoint {
            z: w[1],
            u: y[0],
            du: y[1],
        });
    }
    Ok(out)
}

fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

// Dormand-Prince 5(4) tableau
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn integrate_segment(
    cfg: &IntegratorConfig,
    params: &HeunParams,
    za: Complex64,
    zb: Complex64,
    y0: [Complex64; 2],
) -> Result<[Complex64; 2]> {
    let dz = zb - za;
    if dz == ZERO {
        return Ok(y0);
    }
    let rhs = |t: f64, y: &[Complex64; 2]| -> [Complex64; 2] {
        let z = za + dz * t;
        let (p, q) = params.coefficients(z);
        [dz * y[1], dz * (-p * y[1] - q * y[0])]
    };
    let mut t = 0.0f64;
    let mut h = 0.01f64;
    let mut y = y0;
    let mut steps = 0usize;
    while t < 1.0 {
        if steps > cfg.max_steps {
            return Err(HeunError::StepUnderflow(za + dz * t));
        }
        steps += 1;
        let last = t + h >= 1.0;
        let hh = if last { 1.0 - t } else { h };
        let mut k = [[ZERO; 2]; 7];
        k[0] = rhs(t, &y);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = DP_A[s][j];
                if a != 0.0 {
                    ys[0] += kj[0] * (hh * a);
                    ys[1] += kj[1] * (hh * a);
                }
            }
            k[s] = rhs(t + DP_C[s] * hh, &ys);
        }
        let mut y_new = y;
        let mut err = [ZERO; 2];
        for s in 0..7 {
            y_new[0] += k[s][0] * (hh * DP_B[s]);
            y_new[1] += k[s][1] * (hh * DP_B[s]);
            err[0] += k[s][0] * (hh * DP_E[s]);
            err[1] += k[s][1] * (hh * DP_E[s]);
        }
        let mut ratio = 0.0f64;
        for i in 0..2 {
            let sc = cfg.atol + cfg.rtol * y[i].norm().max(y_new[i].norm());
            ratio = ratio.max(err[i].norm() / sc);
        }
        if !ratio.is_finite() {
            h *= 0.25;
        } else if ratio <= 1.0 {
            t = if last { 1.0 } else { t + hh };
            y = y_new;
            let grow = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = hh * grow;
        } else {
            h = hh * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
        }
        if h < 1e-14 {
            return Err(HeunError::StepUnderflow(za + dz * t));
        }
    }
    if !(is_finite(y[0]) && is_finite(y[1])) {
        return Err(HeunError::NonFinite);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic() -> HeunParams {
        HeunParams::new(
            Complex64::new(0.3, 0.1),
            Complex64::new(0.4, -0.2),
            Complex64::new(0.2, 0.3),
            Complex64::new(1.0, 0.2),
            Complex64::new(0.5, -0.1),
        )
    }

    #[test]
    fn constants_solve_degenerate_equation() {
        let p = HeunParams::real(0.7, 0.3, 0.1, 0.0, 0.0);
        let s = frobenius_heun(&p, ExponentChoice::Zero, 20).unwrap();
        assert_eq!(s.coeffs[0], ONE);
        assert!(s.coeffs[1..].iter().all(|&x| x == ZERO));
    }

    #[test]
    fn first_coefficient() {
        let p = HeunParams::real(2.0, 0.3, 0.1, 0.5, 1.0);
        let s = frobenius_heun(&p, ExponentChoice::Zero, 5).unwrap();
        assert!((s.coeffs[1] - c(-0.5)).norm() < 1e-15);
    }

    #[test]
    fn degenerate_exponents_rejected() {
        let p = HeunParams::real(-1.0, 0.3, 0.1, 0.5, 1.0);
        assert!(matches!(
            frobenius_heun(&p, ExponentChoice::Zero, 5),
            Err(HeunError::IndicialDegeneracy(_))
        ));
        let p = HeunParams::real(3.0, 0.3, 0.1, 0.5, 1.0);
        assert!(matches!(
            frobenius_heun(&p, ExponentChoice::OneMinusGamma, 5),
            Err(HeunError::IndicialDegeneracy(_))
        ));
    }

    #[test]
    fn oracle_at_origin() {
        let p = generic();
        let s = frobenius_heun(&p, ExponentChoice::Zero, 50).unwrap();
        assert_eq!(eval_oracle(&s, ZERO).unwrap().u, ONE);
        let p = HeunParams::real(0.4, 0.3, 0.1, 0.5, 1.0);
        let s = frobenius_heun(&p, ExponentChoice::OneMinusGamma, 50).unwrap();
        assert_eq!(eval_oracle(&s, ZERO).unwrap().u, ZERO);
        assert!(matches!(
            eval_oracle(&s, c(1.2)),
            Err(HeunError::OutsideRadius(_))
        ));
    }

    #[test]
    fn residual_read_off() {
        let p = HeunParams::real(0.3, 0.4, 0.2, 1.0, 0.5);
        let r = heun_residual(&p, c(0.5), ONE, ZERO, ZERO).unwrap();
        assert!((r - c((0.5 - 0.5) / (0.5 * -0.5))).norm() < 1e-15);
        let p0 = HeunParams::real(0.3, 0.4, 0.2, 0.0, 0.0);
        assert_eq!(heun_residual(&p0, c(0.5), ONE, ZERO, ZERO).unwrap(), ZERO);
        assert!(heun_residual(&p, ONE, ONE, ZERO, ZERO).is_err());
    }

    #[test]
    fn oracle_triple_satisfies_equation() {
        let p = generic();
        for choice in [ExponentChoice::Zero, ExponentChoice::OneMinusGamma] {
            let s = frobenius_heun(&p, choice, 200).unwrap();
            let z = c(0.4);
            let o = eval_oracle(&s, z).unwrap();
            let r = heun_residual(&p, z, o.u, o.du, o.d2u).unwrap();
            let scale = heun_residual_scale(&p, z, o.u, o.du, o.d2u);
            assert!(r.norm() < 1e-12 * scale, "{r} vs {scale}");
        }
    }

    #[test]
    fn eq3_constant_term() {
        let p = HeunParams::real(0.3, 0.4, 0.2, 1.0, 0.5);
        let ode = build_eq3(&p).unwrap();
        assert!((ode.c.coeff(0) - c(0.32)).norm() < 1e-15);
        assert!(matches!(
            build_eq3(&HeunParams::real(0.3, 0.4, 0.2, 0.0, 0.5)),
            Err(HeunError::AlphaZero)
        ));
    }

    #[test]
    fn eq3_scaled_is_alpha_multiple() {
        let p = generic();
        let a = build_eq3(&p).unwrap();
        let s = build_eq3_scaled(&p);
        for (x, y) in [(&a.a, &s.a), (&a.b, &s.b), (&a.c, &s.c)] {
            for i in 0..4 {
                assert!((x.coeff(i) * p.alpha - y.coeff(i)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn eq3_at_q_equal_alpha_has_double_root_at_one() {
        let p = HeunParams::real(0.3, 0.4, 0.2, 0.7, 0.7);
        let ode = build_eq3(&p).unwrap();
        assert!(ode.a.eval(ONE).norm() < 1e-15);
        assert!(ode.a.derivative().eval(ONE).norm() < 1e-15);
        assert!(ode.a.eval(ZERO).norm() == 0.0);
    }

    #[test]
    fn eq25_vieta_and_leading() {
        let p = generic();
        let (ode, z1, z2) = build_eq25(&p).unwrap();
        let e = p.epsilon;
        let prod = (c(2.0) * p.gamma * e - c(4.0) * p.q) / (-e * e);
        let sum = (c(4.0) * p.alpha - c(2.0) * (p.gamma + p.delta) * e + e * e) / (e * e);
        assert!((z1 * z2 - prod).norm() < 1e-13 * prod.norm());
        assert!((z1 + z2 - sum).norm() < 1e-13 * sum.norm());
        assert_eq!(ode.c.coeff(4), -e * e / 4.0);
        assert!(matches!(
            build_eq25(&HeunParams::real(0.3, 0.4, 0.0, 1.0, 0.5)),
            Err(HeunError::EpsilonZero)
        ));
    }

    #[test]
    fn v_from_u_trivial() {
        let p = generic();
        assert_eq!(v_from_u(&p, c(0.4), ZERO).unwrap(), ZERO);
        let p0 = HeunParams::real(0.0, 0.0, 0.2, 1.0, 0.5);
        let du = Complex64::new(0.3, -0.2);
        assert_eq!(v_from_u(&p0, c(0.4), du).unwrap(), du);
        assert!(matches!(
            v_from_u(&p, c(-0.4), du),
            Err(HeunError::BranchAmbiguity(_))
        ));
    }

    #[test]
    fn integrator_constant_solution() {
        let p = HeunParams::real(0.3, 0.4, 0.2, 0.0, 0.0);
        let path = [c(0.1), Complex64::new(0.4, 0.3), c(0.7)];
        let out = integrate_heun(&p, &path, (ONE, ZERO)).unwrap();
        for pt in out {
            assert!((pt.u - ONE).norm() < 1e-14);
            assert!(pt.du.norm() < 1e-14);
        }
    }

    #[test]
    fn integrator_matches_series_and_round_trips() {
        let p = generic();
        let s = frobenius_heun(&p, ExponentChoice::Zero, 200).unwrap();
        let a = eval_oracle(&s, c(0.1)).unwrap();
        let b = eval_oracle(&s, c(0.6)).unwrap();
        let out = integrate_heun(&p, &[c(0.1), c(0.6), c(0.1)], (a.u, a.du)).unwrap();
        assert!((out[1].u - b.u).norm() < 1e-10 * b.u.norm());
        assert!((out[1].du - b.du).norm() < 1e-10 * b.du.norm());
        assert!((out[2].u - a.u).norm() < 1e-11 * a.u.norm());
        assert!((out[2].du - a.du).norm() < 1e-11 * a.du.norm());
    }

    #[test]
    fn integrator_rejects_paths_through_singularities() {
        let p = generic();
        assert!(matches!(
            integrate_heun(&p, &[c(-0.5), c(0.5)], (ONE, ZERO)),
            Err(HeunError::PathTooCloseToSingularity { .. })
        ));
    }
}
