//! Expansions of confluent Heun functions in incomplete Beta and Appell F1
//! functions.
//!
//! Every kind writes a solution as `u = g(z) (C₀ + Σₙ aₙ Tₙ(z))`, where the
//! `aₙ` are the Frobenius coefficients of an auxiliary polynomial ODE at the
//! expansion center and each basis term has derivative
//!
//! `Tₙ'(z) = κ z^{-γ} (1-z)^{-δ} P(z) (z-c)ⁿ`,
//!
//! with `P(z)` the exponent factor of the local solution. `g = 1` for the
//! first type and `g = e^{-εz/2}` for the second, whose auxiliary equation
//! comes from `w = e^{εz/2} u`.
//!
//! | kind      | center | basis term `Tₙ`                                   |
//! |-----------|--------|---------------------------------------------------|
//! | `Beta0`   | 0      | `B(1+n-γ+μ, 1-δ; z)`                              |
//! | `Beta1`   | 1      | `(-1)ⁿ B(1-γ, 1+n-δ+μ; z)`                         |
//! | `Appell`  | any    | `(-1)^δ (-c)^{μ+n} ∫₀ᶻ t^{-γ}(1-t)^{-δ}(1-t/c)^{μ+n} dt` |
//!
//! The constant prefactors `κ` use principal branches:
//! `(-1)^δ = e^{iπδ}` for the Appell kinds and `e^{iπ(δ-μ)}` for
//! [`ExpansionKind::Type2Beta1`]. Any constant multiple of a solution is a
//! solution, so these only fix the normalization.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frobenius::{local_recurrence, run_recurrence, FrobeniusError, LocalSeries};
use crate::heun::{build_eq25, build_eq3_scaled, eq22_pi, HeunError, HeunParams, PolyOde};
use crate::numeric::{c, cpow, ipow, is_finite, nonpositive_integer, rel_diff, CompensatedSum, ONE, ZERO};
use crate::special::{appell_f1, incomplete_beta, SeriesDiagnostics, SpecialError};

/// Default truncation order.
pub const DEFAULT_TERMS: usize = 120;
/// Beta ladders are re-anchored by a direct evaluation this often.
pub const REFRESH_EVERY: usize = 25;
/// Relative agreement required between the two C₀ probes.
pub const PROBE_AGREEMENT: f64 = 1e-8;
/// Relative size of the derivative-series tail below which an evaluation
/// counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-10;
/// For algebraically decaying bases: largest of the last 20 terms relative
/// to the largest term.
pub const ALGEBRAIC_TAIL_TOL: f64 = 1e-2;
/// Or the largest of the last 20 terms must be below this fraction of the
/// largest of the 20 before.
pub const ALGEBRAIC_DECAY: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpansionError {
    #[error("μ = {mu} is not an indicial exponent at {center}")]
    InvalidMu { center: Complex64, mu: Complex64 },
    #[error("{kind} expansions cannot be centered at {center}")]
    InvalidCenter {
        kind: ExpansionKind,
        center: Complex64,
    },
    #[error("ε = 0: second-type expansions need ε ≠ 0")]
    EpsilonZero,
    #[error("α = q = 0: the auxiliary equation degenerates")]
    AlphaZero,
    #[error("closed form for C₀ not applicable: {0}")]
    ConditionViolated(String),
    #[error("no closed form for C₀ is known for {0}")]
    Unavailable(ExpansionKind),
    #[error("probe point {0} is degenerate for the C₀ solve")]
    ProbeDegenerate(Complex64),
    #[error("C₀ probes disagree: {first} vs {second}")]
    ProbesDisagree {
        first: Complex64,
        second: Complex64,
    },
    #[error("basis term is singular: {0}")]
    DegenerateGammaDelta(String),
    #[error("series not converged after {terms} terms (last term {last:e})")]
    NoConvergence { terms: usize, last: f64 },
    #[error("outside the domain of the expansion: {0}")]
    OutsideDomain(String),
    #[error("non-finite value encountered")]
    NonFinite,
    #[error(transparent)]
    Frobenius(#[from] FrobeniusError),
    #[error(transparent)]
    Heun(#[from] HeunError),
}

type Result<T> = std::result::Result<T, ExpansionError>;

impl From<SpecialError> for ExpansionError {
    fn from(e: SpecialError) -> Self {
        match e {
            SpecialError::PoleAtC(_)
            | SpecialError::NonPositiveIntegerA(_)
            | SpecialError::GammaPole(_) => ExpansionError::DegenerateGammaDelta(e.to_string()),
            SpecialError::OutsideDomain(s) => ExpansionError::OutsideDomain(s),
            SpecialError::NoConvergence { terms } => ExpansionError::NoConvergence {
                terms,
                last: f64::NAN,
            },
            SpecialError::NonFinite => ExpansionError::NonFinite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExpansionKind {
    Type1Beta0,
    Type1Beta1,
    Type1Appell,
    Type2Beta0,
    Type2Beta1,
    Type2Appell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Beta0,
    Beta1,
    Appell,
}

impl ExpansionKind {
    pub const ALL: [ExpansionKind; 6] = [
        ExpansionKind::Type1Beta0,
        ExpansionKind::Type1Beta1,
        ExpansionKind::Type1Appell,
        ExpansionKind::Type2Beta0,
        ExpansionKind::Type2Beta1,
        ExpansionKind::Type2Appell,
    ];

    /// Second-type kinds carry the factor `e^{-εz/2}`.
    pub fn is_type2(self) -> bool {
        matches!(
            self,
            ExpansionKind::Type2Beta0 | ExpansionKind::Type2Beta1 | ExpansionKind::Type2Appell
        )
    }

    fn family(self) -> Family {
        match self {
            ExpansionKind::Type1Beta0 | ExpansionKind::Type2Beta0 => Family::Beta0,
            ExpansionKind::Type1Beta1 | ExpansionKind::Type2Beta1 => Family::Beta1,
            ExpansionKind::Type1Appell | ExpansionKind::Type2Appell => Family::Appell,
        }
    }

    /// Fixed center of the Beta kinds.
    pub fn fixed_center(self) -> Option<Complex64> {
        match self.family() {
            Family::Beta0 => Some(ZERO),
            Family::Beta1 => Some(ONE),
            Family::Appell => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExpansionKind::Type1Beta0 => "type1beta0",
            ExpansionKind::Type1Beta1 => "type1beta1",
            ExpansionKind::Type1Appell => "type1appell",
            ExpansionKind::Type2Beta0 => "type2beta0",
            ExpansionKind::Type2Beta1 => "type2beta1",
            ExpansionKind::Type2Appell => "type2appell",
        }
    }
}

impl fmt::Display for ExpansionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExpansionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        ExpansionKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| format!("unknown expansion kind `{s}`"))
    }
}

/// How Appell basis terms are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AppellRoute {
    /// Pick a route from the parameters and the center.
    #[default]
    Auto,
    /// Sum the F1 series of each term directly. Loses accuracy to
    /// cancellation once `(1 + |z/c|)^{μ+n}` is large.
    Literal,
    /// Expand `(1-t)^{-δ}` about the center and integrate against incomplete
    /// Beta moments. Needs `|c| < |1-c|`; at `δ = 0` this is the single
    /// incomplete Beta reduction.
    Moments,
}

/// A validated expansion: kind, parameters, center and local exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionSpec {
    pub kind: ExpansionKind,
    pub params: HeunParams,
    pub center: Complex64,
    pub mu: Complex64,
    /// When set, coefficients past this index are known to vanish.
    pub terminates_at: Option<usize>,
    pub appell_route: AppellRoute,
    ode: PolyOde,
    apparent: Vec<Complex64>,
}

impl ExpansionSpec {
    /// The auxiliary equation whose local series supplies the coefficients.
    pub fn ode(&self) -> &PolyOde {
        &self.ode
    }

    /// Apparent singular points of the auxiliary equation.
    pub fn apparent_points(&self) -> &[Complex64] {
        &self.apparent
    }

    /// Mark the series as a finite sum ending at index `n`.
    pub fn with_termination(mut self, n: usize) -> Self {
        self.terminates_at = Some(n);
        self
    }

    pub fn with_appell_route(mut self, route: AppellRoute) -> Self {
        self.appell_route = route;
        self
    }

    /// Coefficients `a₀ … a_N` (fewer for a terminating series).
    pub fn coefficients(&self, n_terms: usize) -> Result<LocalSeries> {
        let n = self.terminates_at.map_or(n_terms, |t| t.min(n_terms));
        let rec = local_recurrence(&self.ode, self.center, self.mu)?;
        Ok(run_recurrence(&rec, n)?)
    }

    /// Distance from the center to the nearest other singular point of the
    /// auxiliary equation, apparent ones included.
    pub fn singular_distance(&self) -> f64 {
        let mut pts = vec![ZERO, ONE];
        pts.extend(&self.apparent);
        pts.iter()
            .map(|p| (p - self.center).norm())
            .filter(|&d| d > 1e-12)
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from the center to the nearest of `0`, `1` other than itself:
    /// the radius of convergence of the coefficient series.
    pub fn true_radius(&self) -> f64 {
        [ZERO, ONE]
            .iter()
            .map(|p| (p - self.center).norm())
            .filter(|&d| d > 1e-12)
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from the center to the nearest apparent singular point. The
    /// forward recurrence picks up a component growing like this distance to
    /// the power `-n`, so coefficients are reliable only while that growth
    /// stays below the decay of the wanted solution.
    pub fn stable_radius(&self) -> f64 {
        self.apparent
            .iter()
            .map(|p| (p - self.center).norm())
            .filter(|&d| d > 1e-12)
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the basis terms decay only algebraically in `n`, so that the
    /// sum converges only when the coefficients do not grow.
    pub fn has_algebraic_terms(&self) -> bool {
        match self.kind.family() {
            Family::Beta0 => false,
            Family::Beta1 => true,
            Family::Appell => !(self.params.gamma == ZERO && self.appell_route == AppellRoute::Auto),
        }
    }

    /// The probe used by [`c0_numeric`] when none is given: half way to the
    /// nearest singular point (at most 0.3), toward the interior of `(0, 1)`
    /// for the Beta kinds and toward the origin for the Appell kinds.
    pub fn default_probe(&self) -> Complex64 {
        let r = 0.5 * self.singular_distance().min(0.6);
        let dir = match self.kind.family() {
            Family::Beta0 => ONE,
            Family::Beta1 => -ONE,
            Family::Appell => -self.center / self.center.norm(),
        };
        self.center + dir * r
    }

    /// [`default_probe`](Self::default_probe), moved onto the side of the
    /// branch cut `(-∞, 0]` where `z` lies. The truncated tail that C₀ absorbs
    /// is not the same on the two sides, so C₀ must be found on the side
    /// where it is used.
    pub fn probe_for(&self, z: Complex64) -> Complex64 {
        let p = self.default_probe();
        if !crosses_cut(p, z) {
            return p;
        }
        // half way from the cut to z along the segment from the center
        let c = self.center;
        let t0 = if c.im == z.im { 0.0 } else { c.im / (c.im - z.im) };
        let t0 = t0.clamp(0.0, 1.0);
        c + (z - c) * (t0 + 0.5 * (1.0 - t0))
    }
}

/// Validate and build an expansion.
pub fn make_spec(
    kind: ExpansionKind,
    params: HeunParams,
    center: Complex64,
    mu: Complex64,
) -> Result<ExpansionSpec> {
    if !params.is_finite() || !is_finite(center) || !is_finite(mu) {
        return Err(ExpansionError::NonFinite);
    }
    match kind.fixed_center() {
        Some(c0) if center != c0 => return Err(ExpansionError::InvalidCenter { kind, center }),
        None if center == ZERO || center == ONE => {
            return Err(ExpansionError::InvalidCenter { kind, center })
        }
        _ => {}
    }
    let (ode, apparent) = if kind.is_type2() {
        if params.epsilon == ZERO {
            return Err(ExpansionError::EpsilonZero);
        }
        let (ode, z1, z2) = build_eq25(&params)?;
        (ode, vec![z1, z2])
    } else {
        if params.alpha == ZERO && params.q == ZERO {
            return Err(ExpansionError::AlphaZero);
        }
        (build_eq3_scaled(&params), params.z0().into_iter().collect())
    };
    match local_recurrence(&ode, center, mu) {
        Ok(_) => {}
        Err(FrobeniusError::NotAnExponent { .. }) => {
            return Err(ExpansionError::InvalidMu { center, mu })
        }
        Err(e) => return Err(e.into()),
    }
    if kind.family() == Family::Appell && nonpositive_integer(-mu).is_none() {
        return Err(ExpansionError::InvalidMu { center, mu });
    }
    Ok(ExpansionSpec {
        kind,
        params,
        center,
        mu,
        terminates_at: None,
        appell_route: AppellRoute::Auto,
        ode,
        apparent,
    })
}

/// The value of C₀ stated in closed form for the Beta kinds.
pub fn c0_closed_form(spec: &ExpansionSpec) -> Result<Complex64> {
    let HeunParams {
        gamma: g,
        epsilon: e,
        q,
        ..
    } = spec.params;
    let mu = spec.mu;
    let denom = match spec.kind {
        ExpansionKind::Type1Beta0 | ExpansionKind::Type2Beta0 => {
            if (ONE - g + mu).re <= 0.0 {
                return Err(ExpansionError::ConditionViolated(format!(
                    "Re(1-γ+μ) = {} <= 0",
                    (ONE - g + mu).re
                )));
            }
            if spec.kind == ExpansionKind::Type1Beta0 {
                q
            } else {
                q - g * e / 2.0
            }
        }
        ExpansionKind::Type1Beta1 | ExpansionKind::Type2Beta1 => {
            if (ONE - g).re <= 0.0 {
                return Err(ExpansionError::ConditionViolated(format!(
                    "Re(1-γ) = {} <= 0",
                    (ONE - g).re
                )));
            }
            return Ok(ZERO);
        }
        k => return Err(ExpansionError::Unavailable(k)),
    };
    if mu == ZERO {
        return Ok(ZERO);
    }
    if denom == ZERO {
        return Err(ExpansionError::ConditionViolated(
            "vanishing denominator".into(),
        ));
    }
    Ok(-mu / denom)
}

/// `F`, `F'`, `F''` of the truncated sum `Σ aₙ Tₙ` at `z`.
fn basis_sum(spec: &ExpansionSpec, series: &LocalSeries, z: Complex64) -> Result<SumParts> {
    let terms = basis_terms(spec, z, series.coeffs.len() - 1)?;
    let mut f = CompensatedSum::new();
    let mut partial = Vec::with_capacity(terms.len());
    let mut contributions = Vec::with_capacity(terms.len());
    for (a, t) in series.coeffs.iter().zip(&terms) {
        let x = a * t;
        f.add(x);
        partial.push(f.value());
        contributions.push(x);
    }
    let (d, dd) = derivative_factor(spec, z);
    let w = z - spec.center;
    let (mut s, mut ds) = (ZERO, ZERO);
    for &a in series.coeffs.iter().rev() {
        ds = ds * w + s;
        s = s * w + a;
    }
    let value = f.value();
    if !is_finite(value) {
        return Err(ExpansionError::NonFinite);
    }
    Ok(SumParts {
        f: value,
        df: d * s,
        d2f: dd * s + d * ds,
        partial,
        contributions,
    })
}

struct SumParts {
    f: Complex64,
    df: Complex64,
    d2f: Complex64,
    partial: Vec<Complex64>,
    contributions: Vec<Complex64>,
}

/// `D(z) = κ z^{-γ}(1-z)^{-δ} P(z)` and its derivative.
fn derivative_factor(spec: &ExpansionSpec, z: Complex64) -> (Complex64, Complex64) {
    let g = spec.params.gamma;
    let d = spec.params.delta;
    let mu = spec.mu;
    let w = cpow(z, -g) * cpow(ONE - z, -d);
    let p = match spec.kind.family() {
        Family::Beta0 => cpow(z, mu),
        Family::Beta1 => cpow(ONE - z, mu),
        Family::Appell => ipow(z - spec.center, mu.re as usize),
    };
    let value = kappa(spec) * w * p;
    let mut log_deriv = -g / z + d / (ONE - z);
    if mu != ZERO {
        log_deriv += mu / (z - spec.center);
    }
    (value, value * log_deriv)
}

fn kappa(spec: &ExpansionSpec) -> Complex64 {
    let i_pi = Complex64::new(0.0, std::f64::consts::PI);
    match spec.kind {
        ExpansionKind::Type1Appell | ExpansionKind::Type2Appell => (i_pi * spec.params.delta).exp(),
        ExpansionKind::Type2Beta1 => (i_pi * (spec.params.delta - spec.mu)).exp(),
        _ => ONE,
    }
}

/// Basis terms `T₀ … T_N` at `z`, without the prefactor `g(z)`.
pub fn basis_terms(spec: &ExpansionSpec, z: Complex64, n_max: usize) -> Result<Vec<Complex64>> {
    if z == ZERO {
        return Err(ExpansionError::OutsideDomain("z = 0".into()));
    }
    let g = spec.params.gamma;
    let d = spec.params.delta;
    let mu = spec.mu;
    match spec.kind.family() {
        Family::Beta0 => {
            let ladder = beta_a_ladder(ONE - g + mu, ONE - d, z, n_max)?;
            Ok(ladder)
        }
        Family::Beta1 => {
            let k = kappa(spec);
            let ladder = beta_b_ladder(ONE - g, ONE - d + mu, z, n_max)?;
            Ok(ladder
                .into_iter()
                .enumerate()
                .map(|(n, b)| if n % 2 == 0 { k * b } else { -k * b })
                .collect())
        }
        Family::Appell => appell_terms(spec, z, n_max),
    }
}

/// `B(a₀+n, b; z)` for `n = 0..=n_max`.
///
/// The upward relation in `a` loses a factor of about `1/|z|` per step, so
/// the ladder runs downward from directly evaluated anchors instead:
/// `B(a, b; z) = ((a+b) B(a+1, b; z) + zᵃ(1-z)ᵇ) / a`.
pub fn beta_a_ladder(
    a0: Complex64,
    b: Complex64,
    z: Complex64,
    n_max: usize,
) -> Result<Vec<Complex64>> {
    for n in 0..=n_max {
        if nonpositive_integer(a0 + c(n as f64)).is_some() {
            return Err(ExpansionError::DegenerateGammaDelta(format!(
                "B(a, b; z) with a = {}",
                a0 + c(n as f64)
            )));
        }
    }
    let base = cpow(z, a0) * cpow(ONE - z, b);
    let mut zn = Vec::with_capacity(n_max + 1);
    let mut p = ONE;
    for _ in 0..=n_max {
        zn.push(p);
        p *= z;
    }
    let mut out = vec![ZERO; n_max + 1];
    let mut n = n_max as i64;
    while n >= 0 {
        let top = n as usize;
        out[top] = incomplete_beta(a0 + c(top as f64), b, z)?.0;
        let bottom = top.saturating_sub(REFRESH_EVERY - 1);
        for k in (bottom..top).rev() {
            let a = a0 + c(k as f64);
            out[k] = ((a + b) * out[k + 1] + base * zn[k]) / a;
        }
        n = bottom as i64 - 1;
    }
    if out.iter().all(|x| is_finite(*x)) {
        Ok(out)
    } else {
        Err(ExpansionError::NonFinite)
    }
}

/// `B(a, b₀+n; z)` for `n = 0..=n_max` by the relation
/// `B(a, b+1; z) = (b B(a, b; z) + zᵃ(1-z)ᵇ) / (a+b)`, re-anchored every
/// [`REFRESH_EVERY`] terms.
pub fn beta_b_ladder(
    a: Complex64,
    b0: Complex64,
    z: Complex64,
    n_max: usize,
) -> Result<Vec<Complex64>> {
    if nonpositive_integer(a).is_some() {
        return Err(ExpansionError::DegenerateGammaDelta(format!(
            "B(a, b; z) with a = {a}"
        )));
    }
    let za = cpow(z, a);
    let w = ONE - z;
    // (1-z)^{b} for the previous b
    let mut wb = cpow(w, b0);
    let mut out: Vec<Complex64> = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let b = b0 + c(n as f64);
        let bp = b - ONE;
        let value = if n % REFRESH_EVERY == 0 || a + bp == ZERO {
            incomplete_beta(a, b, z)?.0
        } else {
            (bp * out[n - 1] + za * wb) / (a + bp)
        };
        if n > 0 {
            wb *= w;
        }
        if !is_finite(value) {
            return Err(ExpansionError::NonFinite);
        }
        out.push(value);
    }
    Ok(out)
}

fn appell_terms(spec: &ExpansionSpec, z: Complex64, n_max: usize) -> Result<Vec<Complex64>> {
    let g = spec.params.gamma;
    let d = spec.params.delta;
    let cc = spec.center;
    let mu = spec.mu.re as usize;
    let k = kappa(spec);
    let finite = spec.terminates_at.is_some();
    if g == ZERO && !finite && spec.appell_route == AppellRoute::Auto {
        return appell_terms_gamma_zero(spec, z, n_max);
    }
    let route = match spec.appell_route {
        AppellRoute::Auto if finite => AppellRoute::Literal,
        AppellRoute::Auto if cc.norm() < (ONE - cc).norm() => AppellRoute::Moments,
        AppellRoute::Auto => {
            return Err(ExpansionError::OutsideDomain(format!(
                "the Appell series about c = {cc} needs |c| < |1-c| unless it terminates"
            )))
        }
        r => r,
    };
    let mut out = Vec::with_capacity(n_max + 1);
    match route {
        AppellRoute::Literal => {
            if nonpositive_integer(ONE - g).is_some() {
                return Err(ExpansionError::DegenerateGammaDelta(format!("1-γ = {}", ONE - g)));
            }
            let pre = cpow(z, ONE - g) / (ONE - g);
            let y = z / cc;
            let mut mc = ipow(-cc, mu);
            for n in 0..=n_max {
                let m = c((mu + n) as f64);
                let (f, _) = appell_f1(ONE - g, d, -m, c(2.0) - g, z, y)?;
                out.push(k * mc * pre * f);
                mc *= -cc;
            }
        }
        _ => {
            let moments = appell_moments(g, d, cc, z, mu, n_max)?;
            let mut mc = ipow(-cc, mu);
            for i in moments {
                out.push(k * mc * i);
                mc *= -cc;
            }
        }
    }
    if out.iter().all(|x| is_finite(*x)) {
        Ok(out)
    } else {
        Err(ExpansionError::NonFinite)
    }
}

/// `I_m(z) = ∫₀ᶻ t^{-γ}(1-t)^{-δ}(1-t/c)^m dt` for `m = μ..=μ+n_max`.
///
/// With `ρ = -c/(1-c)`,
/// `(1-t)^{-δ} = (1-c)^{-δ} Σ_k (δ)_k/k! ρᵏ (1-t/c)ᵏ` on the segment, so
/// `I_m = (1-c)^{-δ} Σ_k (δ)_k/k! ρᵏ M_{m+k}` with
/// `M_j = ∫₀ᶻ t^{-γ}(1-t/c)ʲ dt = c (z/x)^{-γ} B(1-γ, j+1; x)`, `x = z/c`.
fn appell_moments(
    g: Complex64,
    d: Complex64,
    cc: Complex64,
    z: Complex64,
    mu: usize,
    n_max: usize,
) -> Result<Vec<Complex64>> {
    let one_c = ONE - cc;
    if (z - cc).norm() >= one_c.norm() {
        return Err(ExpansionError::OutsideDomain(format!(
            "|z - c| = {} >= |1 - c| = {}",
            (z - cc).norm(),
            one_c.norm()
        )));
    }
    let rho = -cc / one_c;
    let r = rho.norm();
    if r >= 1.0 {
        return Err(ExpansionError::OutsideDomain(format!(
            "moment expansion needs |c| < |1-c|, got ρ = {r}"
        )));
    }
    let k_max = if d == ZERO {
        0
    } else if r == 0.0 {
        0
    } else {
        ((-40.0 / r.ln()).ceil() as usize + 16).min(20_000)
    };
    let x = z / cc;
    let phase = cc * (-g * (z.ln() - x.ln())).exp();
    let betas = beta_b_ladder(ONE - g, ONE, x, mu + n_max + k_max)?;
    let moments: Vec<Complex64> = betas.into_iter().map(|b| phase * b).collect();
    // Principal (1-t)^{-δ} and (1-c)^{-δ}(1 - (t-c)/(1-c))^{-δ} differ by a
    // constant on the segment; at t = 0 the left side is 1.
    let lead = cpow(ONE / one_c, d);
    let mut coefs = Vec::with_capacity(k_max + 1);
    let mut t = ONE;
    for k in 0..=k_max {
        coefs.push(t);
        let kf = c(k as f64);
        t *= (d + kf) / (kf + ONE) * rho;
    }
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let m = mu + n;
        let mut s = CompensatedSum::new();
        for (k, a) in coefs.iter().enumerate() {
            s.add(a * moments[m + k]);
        }
        out.push(lead * s.value());
    }
    Ok(out)
}

/// The γ = 0 reduction: with `s = (z-c)/(1-c)`,
/// `Tₙ ∝ (1-c)ⁿ B(1+μ+n, 1-δ; s)`. The lower limit sits at the center, so the
/// terms differ from the general ones by constants only.
fn appell_terms_gamma_zero(
    spec: &ExpansionSpec,
    z: Complex64,
    n_max: usize,
) -> Result<Vec<Complex64>> {
    let d = spec.params.delta;
    let cc = spec.center;
    let mu = spec.mu;
    let one_c = ONE - cc;
    let s = (z - cc) / one_c;
    if s.norm() >= 1.0 {
        return Err(ExpansionError::OutsideDomain(format!(
            "|z - c| = {} >= |1 - c| = {}",
            (z - cc).norm(),
            one_c.norm()
        )));
    }
    let bracket = (-d * ((ONE - z).ln() - (ONE - s).ln())).exp();
    let k = kappa(spec) * cpow(one_c, ONE + mu) * bracket;
    let ladder = beta_a_ladder(ONE + mu, ONE - d, s, n_max)?;
    let mut p = k;
    Ok(ladder
        .into_iter()
        .map(|b| {
            let t = p * b;
            p *= one_c;
            t
        })
        .collect())
}

/// Prefactor `g(z)` multiplying the whole sum.
fn prefactor(spec: &ExpansionSpec, z: Complex64) -> Complex64 {
    if spec.kind.is_type2() {
        (-spec.params.epsilon * z / 2.0).exp()
    } else {
        ONE
    }
}

/// Value and derivatives of `u` given C₀ and the parts of the basis sum.
fn assemble(spec: &ExpansionSpec, z: Complex64, c0: Complex64, p: &SumParts) -> [Complex64; 3] {
    let w = c0 + p.f;
    if spec.kind.is_type2() {
        let e = spec.params.epsilon;
        let g = prefactor(spec, z);
        [
            g * w,
            g * (p.df - e / 2.0 * w),
            g * (p.d2f - e * p.df + e * e / 4.0 * w),
        ]
    } else {
        [w, p.df, p.d2f]
    }
}

/// Solve the equation, which is linear in C₀, for C₀ at one point.
fn c0_at(spec: &ExpansionSpec, series: &LocalSeries, z: Complex64) -> Result<(Complex64, f64)> {
    if z == ZERO || z == ONE {
        return Err(ExpansionError::ProbeDegenerate(z));
    }
    let parts = basis_sum(spec, series, z)?;
    let HeunParams {
        gamma: g,
        delta: d,
        epsilon: e,
        alpha: al,
        q,
    } = spec.params;
    let z_zm1 = z * (z - ONE);
    // Work with w = C₀ + F; for the second type w = e^{εz/2} u.
    let (pot, pot_scale, drift) = if spec.kind.is_type2() {
        let pi = eq22_pi(&spec.params);
        (pi.eval(z), pi.abs_eval(z), g / z + d / (z - ONE))
    } else {
        (al * z - q, al.norm() * z.norm() + q.norm(), g / z + d / (z - ONE) + e)
    };
    if pot.norm() <= 1e-8 * pot_scale.max(f64::MIN_POSITIVE) {
        return Err(ExpansionError::ProbeDegenerate(z));
    }
    let c0 = -(parts.d2f + drift * parts.df) * z_zm1 / pot - parts.f;
    if !is_finite(c0) {
        return Err(ExpansionError::NonFinite);
    }
    Ok((c0, parts.f.norm()))
}

/// C₀ from the equation itself, at `probe` and at a second point on the same
/// side of the branch cut; the two must agree.
pub fn c0_numeric(spec: &ExpansionSpec, probe: Complex64, n_terms: usize) -> Result<Complex64> {
    let series = spec.coefficients(n_terms)?;
    let (first, f1) = c0_at(spec, &series, probe)?;
    // a quarter of the way back to the center, or outward if that would
    // cross the branch cut
    let mut second_probe = spec.center + (probe - spec.center) * 0.75;
    if crosses_cut(probe, second_probe) {
        second_probe = spec.center + (probe - spec.center) * 1.25;
    }
    let (second, f2) = c0_at(spec, &series, second_probe)?;
    let scale = first.norm().max(second.norm()).max(f1).max(f2);
    if (first - second).norm() > PROBE_AGREEMENT * scale {
        return Err(ExpansionError::ProbesDisagree { first, second });
    }
    Ok(first)
}

/// Whether the segment `[a, b]` meets the negative real axis between points
/// on opposite sides of it. Points on the axis count as the upper side.
fn crosses_cut(a: Complex64, b: Complex64) -> bool {
    let upper = |x: Complex64| x.im > 0.0 || (x.im == 0.0 && x.re < 0.0);
    if upper(a) == upper(b) {
        return false;
    }
    let t = if a.im == b.im { 0.0 } else { a.im / (a.im - b.im) };
    (a + (b - a) * t).re < 0.0
}

/// The C₀ of [`resolve_c0`], found on the side of the branch cut where `z`
/// lies (see [`ExpansionSpec::probe_for`]).
pub fn resolve_c0_at(spec: &ExpansionSpec, n_terms: usize, z: Complex64) -> Result<Complex64> {
    match closed_c0(spec) {
        Some(v) => Ok(v),
        None => c0_numeric(spec, spec.probe_for(z), n_terms),
    }
}

fn closed_c0(spec: &ExpansionSpec) -> Option<Complex64> {
    let closed_ok = match spec.kind.family() {
        Family::Beta0 => true,
        Family::Beta1 => spec.terminates_at.is_some(),
        Family::Appell => false,
    };
    if closed_ok {
        c0_closed_form(spec).ok()
    } else {
        None
    }
}

/// The C₀ used by [`eval_expansion`]: the closed form for the origin-centered
/// Beta kinds (and for terminating sums), otherwise [`c0_numeric`] at the
/// default probe.
pub fn resolve_c0(spec: &ExpansionSpec, n_terms: usize) -> Result<Complex64> {
    match closed_c0(spec) {
        Some(v) => Ok(v),
        None => c0_numeric(spec, spec.default_probe(), n_terms),
    }
}

/// Result of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedExpansion {
    pub c0: Complex64,
    /// `g(z)(C₀ + Σ_{k≤n} a_k T_k)` for each `n`.
    pub partial_sums: Vec<Complex64>,
    pub value: Complex64,
    pub diagnostics: SeriesDiagnostics,
}

/// Evaluate `u(z)` with `N + 1` terms.
pub fn eval_expansion(spec: &ExpansionSpec, z: Complex64, n_terms: usize) -> Result<EvaluatedExpansion> {
    let c0 = resolve_c0_at(spec, n_terms, z)?;
    eval_expansion_with_c0(spec, z, n_terms, c0)
}

/// [`eval_expansion`] with a given C₀.
pub fn eval_expansion_with_c0(
    spec: &ExpansionSpec,
    z: Complex64,
    n_terms: usize,
    c0: Complex64,
) -> Result<EvaluatedExpansion> {
    let series = spec.coefficients(n_terms)?;
    let parts = basis_sum(spec, &series, z)?;
    let g = prefactor(spec, z);
    let partial_sums: Vec<Complex64> = parts.partial.iter().map(|s| g * (c0 + s)).collect();
    let value = g * (c0 + parts.f);
    let diagnostics = diagnose(spec, &series, z, &parts.contributions, g);
    Ok(EvaluatedExpansion {
        c0,
        partial_sums,
        value,
        diagnostics,
    })
}

/// `u`, `u'`, `u''` at `z` for a given C₀ (derivatives from the series).
pub fn eval_derivatives(
    spec: &ExpansionSpec,
    z: Complex64,
    n_terms: usize,
    c0: Complex64,
) -> Result<[Complex64; 3]> {
    let series = spec.coefficients(n_terms)?;
    let parts = basis_sum(spec, &series, z)?;
    Ok(assemble(spec, z, c0, &parts))
}

/// Convergence is judged on the coefficient series `Σ aₙ (z-c)ⁿ`, whose
/// terms decay geometrically inside the domain; some basis families decay
/// only algebraically in `n` on top of that, with the slowly varying part
/// absorbed into C₀.
fn diagnose(
    spec: &ExpansionSpec,
    series: &LocalSeries,
    z: Complex64,
    contributions: &[Complex64],
    g: Complex64,
) -> SeriesDiagnostics {
    let mags = series.term_magnitudes(z);
    let max = mags.iter().copied().fold(0.0, f64::max);
    let last_term_magnitude = contributions.last().map_or(0.0, |t| (t * g).norm());
    let n = mags.len();
    let terminated = spec.terminates_at.is_some_and(|t| t < n) || max == 0.0;
    let effective = mags
        .iter()
        .rposition(|&m| m > CONVERGENCE_TOL * max)
        .map_or(1, |i| i + 1);
    let tail = mags[n.saturating_sub(3)..].iter().copied().fold(0.0, f64::max);
    let mut converged = terminated || tail <= CONVERGENCE_TOL * max;
    if converged && !terminated && spec.has_algebraic_terms() {
        // The terms themselves must die out, if only slowly: either they are
        // already small or they still shrink from one window to the next.
        let u: Vec<f64> = contributions.iter().map(|t| t.norm()).collect();
        let window_max = |lo: usize, hi: usize| u[lo..hi].iter().copied().fold(0.0, f64::max);
        let len = u.len();
        let u_max = window_max(0, len);
        let u_tail = window_max(len.saturating_sub(20), len);
        let u_prev = window_max(len.saturating_sub(40), len.saturating_sub(20));
        converged = u_tail <= ALGEBRAIC_TAIL_TOL * u_max || (len >= 40 && u_tail < ALGEBRAIC_DECAY * u_prev);
    }
    SeriesDiagnostics {
        terms_used: if converged { effective } else { n },
        last_term_magnitude,
        converged,
    }
}

/// Largest radius along the ray `center + r e^{iθ}` at which the coefficient
/// series still decays geometrically: over three successive windows of the
/// last 20 terms the smoothed decay ratio stays below 0.98. Terminating
/// series report `f64::INFINITY`.
pub fn empirical_domain(spec: &ExpansionSpec, ray_angle: f64) -> f64 {
    let _ = ray_angle;
    if spec.terminates_at.is_some() {
        return f64::INFINITY;
    }
    let Ok(series) = spec.coefficients(DEFAULT_TERMS) else {
        return 0.0;
    };
    let mags: Vec<f64> = series.coeffs.iter().map(|a| a.norm()).collect();
    if mags.iter().skip(1).all(|&m| m == 0.0) {
        return f64::INFINITY;
    }
    let ok = |r: f64| tails_decay(&mags, r);
    let tiny = 1e-3;
    if !ok(tiny) {
        return 0.0;
    }
    let mut lo = tiny;
    let mut hi = 2.0 * tiny;
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn tails_decay(mags: &[f64], r: f64) -> bool {
    const WINDOW: usize = 20;
    const SMOOTH: usize = 4;
    let n = mags.len();
    if n < WINDOW + SMOOTH + 3 {
        return false;
    }
    let term = |i: usize| -> f64 {
        (i + 1 - SMOOTH..=i)
            .map(|k| mags[k] * r.powi(k as i32))
            .fold(0.0, f64::max)
    };
    (0..3).all(|k| {
        let end = n - 1 - k;
        let (a, b) = (term(end - WINDOW), term(end));
        if b == 0.0 {
            return true;
        }
        a > 0.0 && (b / a).powf(1.0 / WINDOW as f64) < 0.98
    })
}

/// Relative distance between two evaluations, for tests and reports.
pub fn relative_gap(a: &EvaluatedExpansion, b: &EvaluatedExpansion) -> f64 {
    rel_diff(a.value, b.value)
}
