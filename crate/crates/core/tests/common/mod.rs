//! Helpers shared by the integration tests.
#![allow(dead_code)]

use confluent_heun::expansions::{eval_expansion_with_c0, ExpansionSpec, DEFAULT_TERMS};
use confluent_heun::heun::{eval_oracle, frobenius_heun, heun_residual, ExponentChoice, HeunParams};
use confluent_heun::Complex64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.gen_range(lo..hi)
}

/// Central-difference residual of the equation, relative to its scale, for
/// a function given by values only.
pub fn fd_residual_of(
    params: &HeunParams,
    u: &dyn Fn(Complex64) -> Complex64,
    z: Complex64,
    h: f64,
) -> f64 {
    let hh = cx(h, 0.0);
    let (um2, um1, u0, up1, up2) = (u(z - hh * 2.0), u(z - hh), u(z), u(z + hh), u(z + hh * 2.0));
    let du = (um2 - um1 * 8.0 + up1 * 8.0 - up2) / (hh * 12.0);
    let d2u = (up1 - u0 * 2.0 + um1) / (hh * hh);
    let r = heun_residual(params, z, u0, du, d2u).unwrap();
    let (p, q) = params.coefficients(z);
    r.norm() / (d2u.norm() + (p * du).norm() + (q * u0).norm())
}

pub fn fd_residual(spec: &ExpansionSpec, c0: Complex64, z: Complex64, h: f64) -> f64 {
    let u = |x: Complex64| {
        eval_expansion_with_c0(spec, x, DEFAULT_TERMS, c0)
            .unwrap()
            .value
    };
    fd_residual_of(&spec.params, &u, z, h)
}

/// Least-squares fit of `values` by the two Frobenius branches at the
/// origin; returns the relative residual and the fitted coefficients.
pub fn oracle_span_fit(
    params: &HeunParams,
    zs: &[Complex64],
    values: &[Complex64],
) -> (f64, [Complex64; 2]) {
    let b0 = frobenius_heun(params, ExponentChoice::Zero, 4000).unwrap();
    let b1 = frobenius_heun(params, ExponentChoice::OneMinusGamma, 4000).unwrap();
    let m = zs.len();
    let mut a = DMatrix::<Complex64>::zeros(m, 2);
    for (i, &z) in zs.iter().enumerate() {
        a[(i, 0)] = eval_oracle(&b0, z).unwrap().u;
        a[(i, 1)] = eval_oracle(&b1, z).unwrap().u;
    }
    let y = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&y, 1e-300).unwrap();
    let r = &a * &x - &y;
    (r.norm() / y.norm(), [x[0], x[1]])
}

/// Points on a short arc inside the disc `|z - center| < radius`.
pub fn points_near(center: Complex64, toward: Complex64, radius: f64, n: usize) -> Vec<Complex64> {
    let dir = (toward - center) / (toward - center).norm();
    (0..n)
        .map(|k| {
            let t = 0.35 + 0.5 * k as f64 / (n.max(2) - 1) as f64;
            let angle = 0.6 * (k as f64 / (n.max(2) - 1) as f64 - 0.5);
            center + dir * Complex64::from_polar(radius * t, angle)
        })
        .collect()
}
