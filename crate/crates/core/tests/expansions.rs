mod common;

use common::*;
use confluent_heun::expansions::*;
use confluent_heun::heun::HeunParams;
use confluent_heun::special::appell_f1_at_one;
use confluent_heun::Complex64;
use proptest::prelude::*;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

#[test]
fn beta0_matches_oracle_span() {
    let p = HeunParams::real(0.3, 0.4, 0.2, 1.0, 0.5);
    let spec = make_spec(ExpansionKind::Type1Beta0, p, ZERO, p.gamma).unwrap();
    let c0 = resolve_c0(&spec, 60).unwrap();
    let zs: Vec<Complex64> = (0..12)
        .map(|k| Complex64::from_polar(0.1 + 0.02 * k as f64, 0.25 * (k as f64 / 11.0 - 0.5)))
        .collect();
    let vals: Vec<Complex64> = zs
        .iter()
        .map(|&z| eval_expansion_with_c0(&spec, z, 60, c0).unwrap().value)
        .collect();
    // fit at two points, predict the other ten
    let (_, coef) = oracle_span_fit(&p, &zs[..2], &vals[..2]);
    let b0 = confluent_heun::heun::frobenius_heun(&p, confluent_heun::heun::ExponentChoice::Zero, 4000).unwrap();
    let b1 = confluent_heun::heun::frobenius_heun(&p, confluent_heun::heun::ExponentChoice::OneMinusGamma, 4000)
        .unwrap();
    for (z, v) in zs.iter().zip(&vals).skip(2) {
        let o = coef[0] * confluent_heun::heun::eval_oracle(&b0, *z).unwrap().u
            + coef[1] * confluent_heun::heun::eval_oracle(&b1, *z).unwrap().u;
        assert!(rel(*v, o) < 1e-7, "z = {z}: {v} vs {o}");
    }
    // μ = γ picks the branch regular at the origin
    assert!(coef[1].norm() < 1e-8 * coef[0].norm());
    let at = eval_expansion(&spec, Complex64::new(0.3, 0.0), 60).unwrap();
    assert!(at.diagnostics.converged);
}

#[test]
fn first_and_second_type_give_the_same_solution() {
    let p = HeunParams::real(0.3, 0.4, 0.2, 1.0, -1.5);
    for mu in [ZERO, p.gamma] {
        let s1 = make_spec(ExpansionKind::Type1Beta0, p, ZERO, mu).unwrap();
        let s2 = make_spec(ExpansionKind::Type2Beta0, p, ZERO, mu).unwrap();
        let ratio = |z: Complex64| {
            eval_expansion(&s1, z, DEFAULT_TERMS).unwrap().value
                / eval_expansion(&s2, z, DEFAULT_TERMS).unwrap().value
        };
        let r0 = ratio(Complex64::new(0.25, 0.0));
        for k in 0..10 {
            let z = Complex64::from_polar(0.15 + 0.02 * k as f64, 0.1 * k as f64 - 0.4);
            assert!(rel(ratio(z), r0) < 1e-6, "μ = {mu}, z = {z}");
        }
    }
}

#[test]
fn numeric_c0_matches_closed_form_for_beta0() {
    let mut r = rng(11);
    for _ in 0..10 {
        let p = HeunParams::real(
            uniform(&mut r, -0.8, 0.8),
            uniform(&mut r, -0.8, 0.8),
            uniform(&mut r, -1.0, 1.0),
            uniform(&mut r, 0.5, 1.5),
            uniform(&mut r, -2.0, -1.2),
        );
        for kind in [ExpansionKind::Type1Beta0, ExpansionKind::Type2Beta0] {
            for mu in [ZERO, p.gamma] {
                let spec = make_spec(kind, p, ZERO, mu).unwrap();
                let closed = c0_closed_form(&spec).unwrap();
                for n in [60, DEFAULT_TERMS] {
                    let numeric = c0_numeric(&spec, spec.default_probe(), n).unwrap();
                    let scale = closed.norm().max(1e-300);
                    let err = if closed == ZERO { numeric.norm() } else { (numeric - closed).norm() / scale };
                    assert!(err < 1e-10, "{kind} μ={mu} N={n}: {numeric} vs {closed}");
                }
            }
        }
    }
}

#[test]
fn appell_paths_agree_when_delta_vanishes() {
    let p = HeunParams::real(0.3, 0.0, 0.2, 1.0, -1.5);
    let center = Complex64::new(0.45, 0.0);
    let base = make_spec(ExpansionKind::Type1Appell, p, center, ZERO).unwrap();
    let literal = base.clone().with_appell_route(AppellRoute::Literal);
    let reduced = base.with_appell_route(AppellRoute::Moments);
    let probe = center - 0.05;
    let n = 20;
    let c_lit = c0_numeric(&literal, probe, n).unwrap();
    let c_red = c0_numeric(&reduced, probe, n).unwrap();
    assert!(rel(c_lit, c_red) < 1e-9, "{c_lit} vs {c_red}");
    for k in 0..6 {
        let z = center + Complex64::from_polar(0.04, k as f64);
        let a = eval_expansion_with_c0(&literal, z, n, c_lit).unwrap().value;
        let b = eval_expansion_with_c0(&reduced, z, n, c_red).unwrap().value;
        assert!(rel(a, b) < 1e-9, "z = {z}: {a} vs {b}");
    }
}

#[test]
fn appell_paths_agree_when_gamma_vanishes() {
    let p = HeunParams::real(0.0, 0.35, 0.2, 1.0, -1.5);
    let center = Complex64::new(0.45, 0.0);
    let base = make_spec(ExpansionKind::Type1Appell, p, center, ZERO).unwrap();
    let literal = base.clone().with_appell_route(AppellRoute::Literal);
    let probe = center - 0.05;
    let n = 20;
    let c_lit = c0_numeric(&literal, probe, n).unwrap();
    let c_red = c0_numeric(&base, probe, n).unwrap();
    for k in 0..6 {
        let z = center + Complex64::from_polar(0.04, k as f64);
        let a = eval_expansion_with_c0(&literal, z, n, c_lit).unwrap().value;
        let b = eval_expansion_with_c0(&base, z, n, c_red).unwrap().value;
        assert!(rel(a, b) < 1e-9, "z = {z}: {a} vs {b}");
    }
}

#[test]
fn appell_terms_approach_their_values_at_one() {
    let p = HeunParams::real(0.4, -1.5, 0.2, 1.0, -1.5);
    let center = Complex64::new(0.3, 0.0);
    let spec = make_spec(ExpansionKind::Type1Appell, p, center, ZERO)
        .unwrap()
        .with_appell_route(AppellRoute::Literal);
    let z = Complex64::new(1.0 - 1e-3, 0.0);
    let terms = basis_terms(&spec, z, 4).unwrap();
    let kappa = (Complex64::new(0.0, std::f64::consts::PI) * p.delta).exp();
    for (n, t) in terms.iter().enumerate() {
        let m = n as f64;
        let limit = appell_f1_at_one(ONE - p.gamma, p.delta, Complex64::new(-m, 0.0), ONE / center).unwrap();
        let expected = kappa * (-center).powf(m) * limit / (ONE - p.gamma);
        assert!(rel(*t, expected) < 1e-4, "n = {n}: {t} vs {expected}");
    }
}

#[test]
fn empirical_domain_regressions() {
    let tame = HeunParams::real(0.3, 0.4, 0.2, 1.0, -1.5);
    let spec = make_spec(ExpansionKind::Type1Beta0, tame, ZERO, tame.gamma).unwrap();
    let r = empirical_domain(&spec, 0.0);
    assert!(r >= 0.5, "radius {r}");
    assert!(empirical_domain(&spec.clone().with_termination(3), 0.0).is_infinite());

    // As q shrinks the apparent point z₀ = q/α closes in on the center and
    // the measured radius follows it down.
    let radii: Vec<f64> = [0.1, 0.05, 0.01]
        .iter()
        .map(|&q| {
            let p = HeunParams::real(0.3, 0.4, 0.2, 1.0, q);
            let s = make_spec(ExpansionKind::Type1Beta0, p, ZERO, p.gamma).unwrap();
            empirical_domain(&s, 0.0)
        })
        .collect();
    assert!(radii.windows(2).all(|w| w[1] < w[0]), "{radii:?}");
    for (r, q) in radii.iter().zip([0.1, 0.05, 0.01]) {
        assert!(*r > 0.8 * q && *r < 1.05 * q, "q = {q}: radius {r}");
    }
}

#[test]
fn divergent_coefficients_are_flagged() {
    // z₀ = 0.5 is closer to 1 than the origin is: the forward recurrence about
    // 1 is swamped and the algebraically decaying Beta terms cannot hold it.
    let p = HeunParams::real(0.3, 0.4, 0.2, 1.0, 0.5);
    let spec = make_spec(ExpansionKind::Type1Beta1, p, ONE, ZERO).unwrap();
    assert!(spec.stable_radius() < spec.true_radius());
    let e = eval_expansion_with_c0(&spec, Complex64::new(0.7, 0.05), DEFAULT_TERMS, ZERO).unwrap();
    assert!(!e.diagnostics.converged);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn beta0_solves_the_equation(
        g in -0.8f64..0.8, d in -0.8f64..0.8, e in -1.0f64..1.0,
        al in 0.5f64..1.5, q in -2.0f64..-1.0, zr in 0.15f64..0.4, zi in -0.1f64..0.1,
    ) {
        let p = HeunParams::real(g, d, e, al, q);
        let spec = make_spec(ExpansionKind::Type1Beta0, p, ZERO, p.gamma).unwrap();
        let c0 = resolve_c0(&spec, DEFAULT_TERMS).unwrap();
        let res = fd_residual(&spec, c0, Complex64::new(zr, zi), 1e-3);
        prop_assert!(res < 1e-5, "residual {:e}", res);
    }

    #[test]
    fn partial_sums_end_at_the_value(zr in 0.1f64..0.4, zi in -0.2f64..0.2) {
        let p = HeunParams::real(0.3, 0.4, 0.2, 1.0, -1.5);
        let spec = make_spec(ExpansionKind::Type2Beta0, p, ZERO, ZERO).unwrap();
        let e = eval_expansion(&spec, Complex64::new(zr, zi), 40).unwrap();
        prop_assert_eq!(e.partial_sums.len(), 41);
        prop_assert_eq!(*e.partial_sums.last().unwrap(), e.value);
    }
}
