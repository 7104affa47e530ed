//! Parameter sets for which the first-type expansions terminate.
//!
//! With `α = -ε(1+N-γ-δ+μ)` the trailing recurrence coefficient vanishes at
//! `n = N`, so the series stops after `a_N` once `a_{N+1}` and `a_{N+2}`
//! vanish as well. About `0` or `1` those two conditions are polynomial in
//! `q`; about `z₀ = q/α` they are two equations in `(q, ε)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansions::{
    eval_derivatives, make_spec, resolve_c0, ExpansionError, ExpansionKind, ExpansionSpec,
};
use crate::frobenius::{local_recurrence, run_recurrence, FrobeniusError, LocalRecurrence};
use crate::heun::{
    build_eq3_scaled, eq3_scaled_generic, heun_residual, heun_residual_scale, HeunParams,
};
use crate::numeric::{c, cpow, is_finite, nonpositive_integer, ONE, ZERO};
use crate::poly::Polynomial;
use crate::special::{appell_f1, incomplete_beta, SpecialError};

/// Relative size of `a_{N+1..N+3}` accepted as zero.
pub const TAIL_TOL: f64 = 1e-9;
/// Residual bound of a certified four-term finite sum.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Residual bound of a certified five-term finite sum.
pub const FIVE_TERM_RESIDUAL_TOL: f64 = 1e-8;
/// Roots closer than this (relative) are one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;
/// A root of `a_{N+1}` is shared with `a_{N+2}` when the latter's value there
/// is below this fraction of its natural scale.
pub const COMMON_ROOT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TerminationError {
    #[error("ε = 0: termination needs α = 0, the three-term case")]
    EpsilonZero,
    #[error("expected a q-polynomial of degree {expected}, found degree {found}")]
    DegreeMismatch {
        expected: usize,
        found: usize,
        polynomial: QPolynomial,
    },
    #[error("indicial degeneracy at n = {0}")]
    IndicialDegeneracy(usize),
    #[error("root finding did not converge: {0}")]
    NoConvergence(String),
    #[error("certification failed at q = {q}: {reason}")]
    CertificationFailed { q: Complex64, reason: String },
    #[error("μ = {0} is not an admissible exponent here")]
    InvalidMu(Complex64),
    #[error(transparent)]
    Frobenius(#[from] FrobeniusError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

type Result<T> = std::result::Result<T, TerminationError>;

/// Expansion center of a four-term termination problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Center {
    Zero,
    One,
}

impl Center {
    pub fn point(self) -> Complex64 {
        match self {
            Center::Zero => ZERO,
            Center::One => ONE,
        }
    }

    fn kind(self) -> ExpansionKind {
        match self {
            Center::Zero => ExpansionKind::Type1Beta0,
            Center::One => ExpansionKind::Type1Beta1,
        }
    }
}

/// Polynomial in the accessory parameter, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPolynomial {
    pub coeffs: Vec<Complex64>,
}

impl QPolynomial {
    pub fn from_poly(p: &Polynomial) -> Self {
        QPolynomial {
            coeffs: p.coeffs().to_vec(),
        }
    }

    pub fn poly(&self) -> Polynomial {
        Polynomial::new(self.coeffs.clone())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, q: Complex64) -> Complex64 {
        self.poly().eval(q)
    }
}

/// `α = -ε(1+N-γ-δ+μ)`, which makes the trailing coefficient vanish at `n = N`.
pub fn alpha_condition(
    n: usize,
    mu: Complex64,
    gamma: Complex64,
    delta: Complex64,
    epsilon: Complex64,
) -> Result<Complex64> {
    if epsilon == ZERO {
        return Err(TerminationError::EpsilonZero);
    }
    Ok(-epsilon * (c(1.0 + n as f64) - gamma - delta + mu))
}

fn check_mu(center: Center, mu: Complex64, gamma: Complex64, delta: Complex64) -> Result<()> {
    let other = match center {
        Center::Zero => gamma,
        Center::One => delta,
    };
    if mu == ZERO || mu == other {
        Ok(())
    } else {
        Err(TerminationError::InvalidMu(mu))
    }
}

/// Series coefficients `aₙ(q) = Nₙ(q) / ℓ(q)ⁿ` with `a₀ = 1`, carried as
/// exact polynomials in `q`.
///
/// The leading recurrence coefficient about `0` or `1` is `sₙ ℓ(q)` with `ℓ`
/// linear, so `Nₙ = -(1/sₙ) Σ_j K(n, j) N_{n-j} ℓ^{j-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QSeries {
    pub ell: Polynomial,
    pub numerators: Vec<Polynomial>,
}

impl QSeries {
    /// `aₙ` at a numeric `q`.
    pub fn coefficient(&self, n: usize, q: Complex64) -> Complex64 {
        self.numerators[n].eval(q) / self.ell.eval(q).powu(n as u32)
    }
}

/// Propagate the recurrence about `center` with `q` unknown, up to `n_max`.
pub fn q_series(
    alpha: Complex64,
    mu: Complex64,
    center: Center,
    gamma: Complex64,
    delta: Complex64,
    epsilon: Complex64,
    n_max: usize,
) -> Result<QSeries> {
    let ode = eq3_scaled_generic(gamma, delta, epsilon, alpha, Polynomial::identity());
    let rec = LocalRecurrence::unchecked(&ode, center.point(), mu)?;
    let ell = leading_factor(&rec)?;
    let mut nums: Vec<Polynomial> = vec![Polynomial::constant(ONE)];
    let mut ell_pow = vec![Polynomial::constant(ONE)];
    for k in 1..rec.bandwidth {
        ell_pow.push(ell_pow[k - 1].mul(&ell));
    }
    for m in 1..=n_max {
        let lead = rec.coeff(m, 0);
        let (s, rem) = lead.div_rem(&ell);
        if rem.max_coeff() > 1e-12 * lead.max_coeff() || s.degree() != Some(0) {
            return Err(TerminationError::IndicialDegeneracy(m));
        }
        let s = s.coeff(0);
        if s.norm() <= 1e-12 * lead.max_coeff() {
            return Err(TerminationError::IndicialDegeneracy(m));
        }
        let mut acc = Polynomial::zero();
        for j in 1..rec.bandwidth.min(m + 1) {
            let t = rec.coeff(m, j).mul(&nums[m - j]).mul(&ell_pow[j - 1]);
            acc = acc.add(&t);
        }
        nums.push(acc.scale(-ONE / s));
    }
    Ok(QSeries {
        ell,
        numerators: nums,
    })
}

/// `ℓ(q)` and the numerators of `a_{N+1}`, `a_{N+2}`, `a_{N+3}` under the
/// termination condition on `α`.
pub fn tail_numerators(
    n: usize,
    mu: Complex64,
    center: Center,
    gamma: Complex64,
    delta: Complex64,
    epsilon: Complex64,
) -> Result<(Polynomial, [Polynomial; 3])> {
    check_mu(center, mu, gamma, delta)?;
    let alpha = alpha_condition(n, mu, gamma, delta, epsilon)?;
    let mut s = q_series(alpha, mu, center, gamma, delta, epsilon, n + 3)?;
    let t3 = s.numerators.pop().unwrap();
    let t2 = s.numerators.pop().unwrap();
    let t1 = s.numerators.pop().unwrap();
    Ok((s.ell, [t1, t2, t3]))
}

/// The linear factor `ℓ(q)` shared by every leading coefficient, made monic.
fn leading_factor(rec: &LocalRecurrence<Polynomial>) -> Result<Polynomial> {
    let k1 = rec.coeff(1, 0);
    match k1.degree() {
        Some(1) => Ok(k1.monic()),
        Some(0) => Ok(Polynomial::constant(ONE)),
        _ => Err(TerminationError::IndicialDegeneracy(1)),
    }
}

/// Divide out every power of `ell` that divides `p` up to rounding.
fn strip_factor(p: &Polynomial, ell: &Polynomial) -> Polynomial {
    let mut p = p.clone();
    if ell.degree() != Some(1) {
        return p;
    }
    while p.degree().unwrap_or(0) > 0 {
        let (quot, rem) = p.div_rem(ell);
        if rem.max_coeff() > 1e-10 * p.max_coeff() {
            break;
        }
        p = quot;
    }
    p
}

/// Monic polynomial whose roots are the accessory parameters for which the
/// expansion about `center` terminates after `a_N`.
///
/// Each of `a_{N+1} = 0` and `a_{N+2} = 0` alone carries roots that the other
/// does not share; only the common roots terminate the series. They are the
/// roots of `a_{N+1}`'s numerator at which `a_{N+2}`'s numerator also
/// vanishes (and `ℓ(q) ≠ 0`). The degree is checked against `N+1`.
pub fn q_polynomial(
    n: usize,
    mu: Complex64,
    center: Center,
    gamma: Complex64,
    delta: Complex64,
    epsilon: Complex64,
) -> Result<QPolynomial> {
    let (ell, [p1, p2, _]) = tail_numerators(n, mu, center, gamma, delta, epsilon)?;
    let p1 = strip_factor(&p1, &ell);
    let p2 = strip_factor(&p2, &ell);
    let mut common = Vec::new();
    if p1.degree().unwrap_or(0) > 0 {
        for r in solve_roots(&p1)? {
            if p2.eval(r).norm() <= COMMON_ROOT_TOL * p2.abs_eval(r) {
                common.push(r);
            }
        }
    }
    let poly = QPolynomial::from_poly(&Polynomial::from_roots(&common));
    if poly.degree() != n + 1 {
        return Err(TerminationError::DegreeMismatch {
            expected: n + 1,
            found: poly.degree(),
            polynomial: poly,
        });
    }
    Ok(poly)
}

/// All roots of `p`: eigenvalues of the companion matrix, each polished by
/// Newton's method.
pub fn solve_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    let deg = match p.degree() {
        Some(d) if d >= 1 => d,
        _ => {
            return Err(TerminationError::NoConvergence(
                "polynomial has no roots".into(),
            ))
        }
    };
    let m = p.monic();
    let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -m.coeff(i);
    }
    let eig = comp
        .schur()
        .eigenvalues()
        .ok_or_else(|| TerminationError::NoConvergence("Schur decomposition failed".into()))?;
    let dp = m.derivative();
    let scale = m.max_coeff();
    let mut roots = Vec::with_capacity(deg);
    for &r0 in eig.iter() {
        let mut r = r0;
        let mut best = m.eval(r).norm();
        for _ in 0..50 {
            let d = dp.eval(r);
            if d == ZERO {
                break;
            }
            let next = r - m.eval(r) / d;
            let v = m.eval(next).norm();
            if !(v < best) {
                break;
            }
            r = next;
            best = v;
        }
        if best > 1e-10 * scale.max(m.abs_eval(r)) {
            return Err(TerminationError::NoConvergence(format!(
                "root {r} leaves residual {best:e}"
            )));
        }
        roots.push(r);
    }
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    Ok(roots)
}

/// Evidence that a parameter set terminates the expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub q: Complex64,
    pub epsilon: Complex64,
    pub alpha: Complex64,
    /// `|a_{N+1}|`, `|a_{N+2}|`, `|a_{N+3}|` relative to `max |a₀ … a_N|`.
    pub a_tail_norms: [f64; 3],
    /// `|a_N|` relative to `max |a₀ … a_N|`.
    pub a_last_norm: f64,
    /// Largest relative residual of the finite sum over the check points.
    pub max_residual: f64,
}

/// Points of `(0.05, 0.95)` at which finite sums are checked.
pub fn check_points() -> Vec<Complex64> {
    (0..7).map(|k| c(0.05 + 0.9 * (k as f64 + 0.5) / 7.0)).collect()
}

fn tail_norms(spec: &ExpansionSpec, n: usize) -> Result<([f64; 3], f64)> {
    let rec = local_recurrence(spec.ode(), spec.center, spec.mu)?;
    let a = run_recurrence(&rec, n + 3)?.coeffs;
    let scale = a[..=n].iter().map(|x| x.norm()).fold(0.0, f64::max);
    Ok((
        [a[n + 1].norm() / scale, a[n + 2].norm() / scale, a[n + 3].norm() / scale],
        a[n].norm() / scale,
    ))
}

fn max_residual(spec: &ExpansionSpec, n: usize) -> Result<f64> {
    let c0 = resolve_c0(spec, n)?;
    let mut worst = 0.0f64;
    for z in check_points() {
        let [u, du, d2u] = eval_derivatives(spec, z, n, c0)?;
        let r = heun_residual(&spec.params, z, u, du, d2u).map_err(ExpansionError::from)?;
        let s = heun_residual_scale(&spec.params, z, u, du, d2u);
        worst = worst.max(r.norm() / s);
    }
    Ok(worst)
}

fn verdict(cert: Certificate, tol: f64) -> Result<Certificate> {
    let reason = if cert.a_tail_norms.iter().any(|t| !(*t < TAIL_TOL)) {
        Some(format!("tail coefficients {:?}", cert.a_tail_norms))
    } else if !(cert.a_last_norm > TAIL_TOL) {
        Some(format!("a_N vanishes ({:e})", cert.a_last_norm))
    } else if !(cert.max_residual < tol) {
        Some(format!("finite-sum residual {:e}", cert.max_residual))
    } else {
        None
    };
    match reason {
        Some(reason) => Err(TerminationError::CertificationFailed { q: cert.q, reason }),
        None => Ok(cert),
    }
}

/// The terminating expansion about `0` or `1` at a candidate `q`.
pub fn terminating_spec(
    n: usize,
    mu: Complex64,
    center: Center,
    gamma: Complex64,
    delta: Complex64,
    epsilon: Complex64,
    q: Complex64,
) -> Result<ExpansionSpec> {
    check_mu(center, mu, gamma, delta)?;
    let alpha = alpha_condition(n, mu, gamma, delta, epsilon)?;
    let params = HeunParams::new(gamma, delta, epsilon, alpha, q);
    Ok(make_spec(center.kind(), params, center.point(), mu)?.with_termination(n))
}

/// Rerun the recurrence at `q_root` and check that `a_{N+1..N+3}` vanish,
/// `a_N` does not, and that the finite sum solves the equation.
pub fn certify(
    n: usize,
    mu: Complex64,
    center: Center,
    gamma: Complex64,
    delta: Complex64,
    epsilon: Complex64,
    q_root: Complex64,
) -> Result<Certificate> {
    let spec = terminating_spec(n, mu, center, gamma, delta, epsilon, q_root)?;
    let (a_tail_norms, a_last_norm) = tail_norms(&spec, n)?;
    let cert = Certificate {
        q: q_root,
        epsilon,
        alpha: spec.params.alpha,
        a_tail_norms,
        a_last_norm,
        max_residual: max_residual(&spec, n)?,
    };
    verdict(cert, RESIDUAL_TOL)
}

/// Outcome of a four-term termination run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: Complex64,
    pub alpha: Complex64,
    pub roots: Vec<RootEntry>,
    pub certificates: Vec<CertificateEntry>,
    pub count_expected: usize,
    pub count_found: usize,
    /// Set when the common-root polynomial does not have degree `N+1`.
    pub degree_mismatch: Option<String>,
    /// Candidate roots that failed certification, with the reason.
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootEntry {
    pub q: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub a_tail_norms: [f64; 3],
    pub max_residual: f64,
}

/// Find and certify every terminating `q` for the given `N`, `μ`, center.
pub fn run_termination(
    n: usize,
    mu: Complex64,
    center: Center,
    gamma: Complex64,
    delta: Complex64,
    epsilon: Complex64,
) -> Result<TerminationReport> {
    let alpha = alpha_condition(n, mu, gamma, delta, epsilon)?;
    let (poly, degree_mismatch) = match q_polynomial(n, mu, center, gamma, delta, epsilon) {
        Ok(p) => (p, None),
        Err(TerminationError::DegreeMismatch {
            expected,
            found,
            polynomial,
        }) => (
            polynomial,
            Some(format!("expected degree {expected}, found {found}")),
        ),
        Err(e) => return Err(e),
    };
    let roots = if poly.degree() == 0 {
        Vec::new()
    } else {
        solve_roots(&poly.poly())?
    };
    let mut out_roots = Vec::new();
    let mut certs = Vec::new();
    let mut rejected = Vec::new();
    for q in roots {
        match certify(n, mu, center, gamma, delta, epsilon, q) {
            Ok(cert) => {
                out_roots.push(RootEntry { q, eps: None });
                certs.push(CertificateEntry {
                    a_tail_norms: cert.a_tail_norms,
                    max_residual: cert.max_residual,
                });
            }
            Err(e) => rejected.push(e.to_string()),
        }
    }
    Ok(TerminationReport {
        n,
        mu,
        alpha,
        count_found: out_roots.len(),
        roots: out_roots,
        certificates: certs,
        count_expected: n + 1,
        degree_mismatch,
        rejected,
    })
}

// ---------------------------------------------------------------------------
// Five-term case: expansion about z₀ = q/α

/// One certified `(q, ε)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveTermPair {
    pub q: Complex64,
    pub epsilon: Complex64,
    pub certificate: Certificate,
}

/// Outcome of the `(q, ε)` search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveTermReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: Complex64,
    pub pairs: Vec<FiveTermPair>,
    pub count_expected: usize,
    pub count_found: usize,
    /// The two conditions are not independent (one vanishes identically),
    /// so solutions form a one-parameter family; `pairs` then holds samples.
    pub one_parameter_family: bool,
    /// `count_found != count_expected`, reported rather than suppressed.
    pub count_mismatch: bool,
}

fn five_term_spec(
    n: usize,
    mu: Complex64,
    gamma: Complex64,
    delta: Complex64,
    q: Complex64,
    epsilon: Complex64,
) -> Result<ExpansionSpec> {
    let alpha = alpha_condition(n, mu, gamma, delta, epsilon)?;
    let params = HeunParams::new(gamma, delta, epsilon, alpha, q);
    let center = q / alpha;
    Ok(make_spec(ExpansionKind::Type1Appell, params, center, mu)?.with_termination(n))
}

/// `(a_{N+1}, a_{N+2})` relative to `max |a₀ … a_N|` about `z₀`.
fn five_term_conditions(
    n: usize,
    mu: Complex64,
    gamma: Complex64,
    delta: Complex64,
    x: [Complex64; 2],
) -> Option<[Complex64; 2]> {
    let [q, eps] = x;
    if eps.norm() < 1e-6 {
        return None;
    }
    let alpha = alpha_condition(n, mu, gamma, delta, eps).ok()?;
    let params = HeunParams::new(gamma, delta, eps, alpha, q);
    let z0 = q / alpha;
    if !is_finite(z0) || z0.norm() < 1e-6 || (z0 - ONE).norm() < 1e-6 {
        return None;
    }
    let ode = build_eq3_scaled(&params);
    let rec = local_recurrence(&ode, z0, mu).ok()?;
    let a = run_recurrence(&rec, n + 2).ok()?.coeffs;
    let scale = a[..=n].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let out = [a[n + 1] / scale, a[n + 2] / scale];
    out.iter().all(|v| is_finite(*v)).then_some(out)
}

/// Damped Newton in `(q, ε)` with a central-difference Jacobian; least
/// squares steps keep it usable when the Jacobian is rank deficient.
fn newton2(
    f: &dyn Fn([Complex64; 2]) -> Option<[Complex64; 2]>,
    mut x: [Complex64; 2],
) -> Option<[Complex64; 2]> {
    let norm = |v: [Complex64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let mut fx = f(x)?;
    for _ in 0..80 {
        if norm(fx) < 1e-14 {
            return Some(x);
        }
        let mut jac = DMatrix::<Complex64>::zeros(2, 2);
        for k in 0..2 {
            let h = 1e-7 * (1.0 + x[k].norm());
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (f(xp)?, f(xm)?);
            for i in 0..2 {
                jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(&[-fx[0], -fx[1]]);
        let step = jac.svd(true, true).solve(&rhs, 1e-14).ok()?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xn = [x[0] + step[0] * t, x[1] + step[1] * t];
            if let Some(fxn) = f(xn) {
                if norm(fxn) < norm(fx) {
                    x = xn;
                    fx = fxn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (norm(fx) < 1e-12).then_some(x)
}

/// Seed grid: 40 values of `q` times 40 values of `ε`, each on a complex
/// lattice around the origin.
fn seed_grid() -> Vec<[Complex64; 2]> {
    let lattice = |radius: f64| -> Vec<Complex64> {
        (0..40)
            .map(|k| {
                let ring = 1 + k / 8;
                let angle = 2.0 * std::f64::consts::PI * ((k % 8) as f64 + 0.37) / 8.0;
                Complex64::from_polar(radius * ring as f64 / 5.0, angle + 0.11 * ring as f64)
            })
            .collect()
    };
    let qs = lattice(4.0);
    let es = lattice(3.0);
    qs.iter()
        .flat_map(|&q| es.iter().map(move |&e| [q, e]))
        .collect()
}

fn same_pair(a: &[Complex64; 2], b: &[Complex64; 2]) -> bool {
    let s = 1.0 + a[0].norm() + a[1].norm();
    (a[0] - b[0]).norm() + (a[1] - b[1]).norm() <= CLUSTER_TOL * s
}

/// Certify a `(q, ε)` pair about `z₀`.
pub fn certify_five_term(
    n: usize,
    mu: Complex64,
    gamma: Complex64,
    delta: Complex64,
    q: Complex64,
    epsilon: Complex64,
) -> Result<Certificate> {
    let spec = five_term_spec(n, mu, gamma, delta, q, epsilon)?;
    let (a_tail_norms, a_last_norm) = tail_norms(&spec, n)?;
    let cert = Certificate {
        q,
        epsilon,
        alpha: spec.params.alpha,
        a_tail_norms,
        a_last_norm,
        max_residual: max_residual(&spec, n)?,
    };
    verdict(cert, FIVE_TERM_RESIDUAL_TOL)
}

/// Solve `a_{N+1} = a_{N+2} = 0` about `z₀` for `(q, ε)` from a seed grid,
/// deduplicate, certify, and compare the count with `N²` (`μ = 0`) or
/// `(N+1)(N+2)` (`μ = 2`).
pub fn five_term_termination(
    n: usize,
    mu: Complex64,
    gamma: Complex64,
    delta: Complex64,
) -> Result<FiveTermReport> {
    let count_expected = if mu == ZERO {
        n * n
    } else if mu == c(2.0) {
        (n + 1) * (n + 2)
    } else {
        return Err(TerminationError::InvalidMu(mu));
    };
    let f = |x: [Complex64; 2]| five_term_conditions(n, mu, gamma, delta, x);
    let seeds = seed_grid();
    // An identically vanishing first condition leaves a curve of solutions.
    let degenerate = seeds
        .iter()
        .step_by(97)
        .filter_map(|&s| f(s))
        .all(|v| v[0].norm() < 1e-13);
    let mut found: Vec<[Complex64; 2]> = seeds
        .par_iter()
        .filter_map(|&s| newton2(&f, s))
        .collect();
    found.sort_by(|a, b| {
        (a[0].re, a[0].im, a[1].re, a[1].im)
            .partial_cmp(&(b[0].re, b[0].im, b[1].re, b[1].im))
            .unwrap()
    });
    let mut unique: Vec<[Complex64; 2]> = Vec::new();
    for x in found {
        if !unique.iter().any(|u| same_pair(u, &x)) {
            unique.push(x);
        }
    }
    let certified: Vec<FiveTermPair> = unique
        .par_iter()
        .filter_map(|&[q, e]| {
            certify_five_term(n, mu, gamma, delta, q, e)
                .ok()
                .map(|certificate| FiveTermPair {
                    q,
                    epsilon: e,
                    certificate,
                })
        })
        .collect();
    let count_found = certified.len();
    Ok(FiveTermReport {
        n,
        mu,
        pairs: certified,
        count_expected,
        count_found,
        one_parameter_family: degenerate,
        count_mismatch: degenerate || count_found != count_expected,
    })
}

// ---------------------------------------------------------------------------
// Finite sums as standalone objects

/// One basis function of a finite sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BasisTerm {
    /// `factor · B(a, b; z)`.
    IncompleteBeta {
        factor: Complex64,
        a: Complex64,
        b: Complex64,
    },
    /// `factor · z^{a} F1(a; b1, b2; a+1; z, z/center)`.
    AppellF1 {
        factor: Complex64,
        a: Complex64,
        b1: Complex64,
        b2: Complex64,
        center: Complex64,
    },
}

impl BasisTerm {
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        match *self {
            BasisTerm::IncompleteBeta { factor, a, b } => Ok(factor * incomplete_beta(a, b, z)?.0),
            BasisTerm::AppellF1 {
                factor,
                a,
                b1,
                b2,
                center,
            } => {
                let (f, _) = appell_f1(a, b1, b2, a + ONE, z, z / center)?;
                Ok(factor * cpow(z, a) * f)
            }
        }
    }
}

/// A closed-form solution `u = C₀ + Σ aₙ Tₙ(z)` of the equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSumSolution {
    pub params: HeunParams,
    pub c0: Complex64,
    pub coeffs: Vec<Complex64>,
    pub basis: Vec<BasisTerm>,
}

impl FiniteSumSolution {
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let mut s = self.c0;
        for (a, t) in self.coeffs.iter().zip(&self.basis) {
            s += a * t.eval(z)?;
        }
        Ok(s)
    }
}

/// Explicit finite sum of a terminating first-type expansion.
pub fn finite_sum_solution(spec: &ExpansionSpec) -> Result<FiniteSumSolution> {
    let n = spec
        .terminates_at
        .ok_or_else(|| TerminationError::CertificationFailed {
            q: spec.params.q,
            reason: "expansion is not marked as terminating".into(),
        })?;
    let coeffs = spec.coefficients(n)?.coeffs;
    let c0 = resolve_c0(spec, n)?;
    let g = spec.params.gamma;
    let d = spec.params.delta;
    let mu = spec.mu;
    let i_pi = Complex64::new(0.0, std::f64::consts::PI);
    let basis = (0..coeffs.len())
        .map(|k| {
            let kf = c(k as f64);
            match spec.kind {
                ExpansionKind::Type1Beta0 => Ok(BasisTerm::IncompleteBeta {
                    factor: ONE,
                    a: ONE + kf - g + mu,
                    b: ONE - d,
                }),
                ExpansionKind::Type1Beta1 => Ok(BasisTerm::IncompleteBeta {
                    factor: if k % 2 == 0 { ONE } else { -ONE },
                    a: ONE - g,
                    b: ONE + kf - d + mu,
                }),
                ExpansionKind::Type1Appell => {
                    if nonpositive_integer(ONE - g).is_some() {
                        return Err(TerminationError::Special(SpecialError::GammaPole(ONE - g)));
                    }
                    let m = (mu + kf).re;
                    Ok(BasisTerm::AppellF1 {
                        factor: (i_pi * d).exp() * (-spec.center).powi(m as i32) / (ONE - g),
                        a: ONE - g,
                        b1: d,
                        b2: c(-m),
                        center: spec.center,
                    })
                }
                k => Err(TerminationError::Expansion(ExpansionError::Unavailable(k))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiniteSumSolution {
        params: spec.params,
        c0,
        coeffs,
        basis,
    })
}

/// Trailing coefficient `K(n, bandwidth-1)` of the second-type recurrence
/// about the origin, for checking that it is the constant `-ε²/4`.
pub fn second_type_trailing(params: &HeunParams, n: usize) -> Result<Complex64> {
    let (ode, _, _) = crate::heun::build_eq25(params).map_err(ExpansionError::from)?;
    let rec = LocalRecurrence::unchecked(&ode, ZERO, ZERO)?;
    Ok(rec.coeff(n, rec.bandwidth - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_condition(1, ZERO, ZERO, ZERO, ONE).unwrap(), c(-2.0));
        let a = alpha_condition(2, c(0.5), c(0.5), c(0.3), c(2.0)).unwrap();
        assert!((a - c(-5.4)).norm() < 1e-14);
        assert_eq!(
            alpha_condition(2, ZERO, c(0.5), c(0.3), ZERO),
            Err(TerminationError::EpsilonZero)
        );
    }

    #[test]
    fn roots_of_simple_polynomials() {
        let r = solve_roots(&Polynomial::from_real(&[-1.0, 0.0, 1.0])).unwrap();
        assert!((r[0] + ONE).norm() < 1e-14 && (r[1] - ONE).norm() < 1e-14);
        let triple = Polynomial::from_roots(&[c(2.0), c(2.0), c(2.0)]);
        for r in solve_roots(&triple).unwrap() {
            assert!((r - c(2.0)).norm() < 1e-4);
        }
    }
}
