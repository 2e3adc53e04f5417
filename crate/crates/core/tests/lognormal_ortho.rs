use lnprod::lognormal::*;
use lnprod::numerics::GaussLegendre;
use lnprod::{Error, Sign, SignedLogReal};
use proptest::prelude::*;
use rug::Float;

const P: u32 = 256;

fn params(mu: f64, s2: f64) -> LognormalParams {
    LognormalParams::new(mu, s2).unwrap()
}

fn rel(a: &SignedLogReal, b: &SignedLogReal) -> f64 {
    a.rel_diff(b)
}

#[test]
fn params_reject_degenerate_variance() {
    assert!(matches!(LognormalParams::new(0.0, 0.0), Err(Error::Domain { .. })));
    assert!(LognormalParams::new(0.0, -1.0).is_err());
    assert!(LognormalParams::new(f64::NAN, 1.0).is_err());
    let p = params(0.3, 0.8);
    assert!((p.q() - 0.8f64.exp()).abs() < 1e-15);
}

#[test]
fn pdf_examples() {
    let p = params(0.7, 0.4);
    let at_median = lognormal_pdf(0.7f64.exp(), &p).unwrap();
    let expect = 1.0 / (0.7f64.exp() * (2.0 * std::f64::consts::PI * 0.4).sqrt());
    assert!((at_median - expect).abs() < 1e-15);
    let unit = lognormal_pdf(1.0, &params(0.0, 1.0)).unwrap();
    assert!((unit - 0.398_942_280_401_432_7).abs() < 1e-15);
    assert!(lognormal_pdf(0.0, &p).is_err());
    assert!(lognormal_pdf(-1.0, &p).is_err());
}

#[test]
fn pdf_integrates_to_one() {
    let p = params(0.2, 0.6);
    let s = p.sigma();
    let rule = GaussLegendre::new(20).unwrap();
    // x = e^{mu + s u}, dx = s x du
    let total = rule.integrate(-12.0, 12.0, 48, |u| {
        let x = (p.mu() + s * u).exp();
        lognormal_pdf(x, &p).unwrap() * s * x
    });
    assert!((total - 1.0).abs() < 1e-13);
}

#[test]
fn moment_examples() {
    let p = params(0.0, 1.0);
    assert!(lognormal_moment(0, &p, P).log_mag().is_zero());
    assert!((lognormal_moment(1, &p, P).to_f64() - 1.648_721_270_700_128_1).abs() < 1e-15);
    let p = params(-0.2886, 2.4674);
    let nu2 = lognormal_moment(2, &p, P);
    assert!((nu2.log_mag().to_f64() - (-0.5772 + 4.9348)).abs() < 1e-14);
    let quad = lognormal_expectation(&p, -12.0, 12.0 + 2.0 * p.sigma(), P, |x| Ok(Float::with_val(P, x.square_ref())))
        .unwrap();
    assert!(rel(&SignedLogReal::from_float(&quad), &nu2) < 1e-12);
}

#[test]
fn moment_exponent_is_exact_far_beyond_f64() {
    let p = params(1.0, 2.5);
    // 30 + 900 * 1.25 = 1155, e^1155 overflows f64
    let nu = lognormal_moment(30, &p, P);
    assert_eq!(nu.log_mag().to_f64(), 1155.0);
    assert_eq!(nu.to_f64(), f64::INFINITY);
}

#[test]
fn closed_coefficient_examples() {
    for &(mu, s2) in &[(0.0, 1.0), (0.3, 0.8), (-1.2, 0.05)] {
        let p = params(mu, s2);
        for n in 0..10 {
            let c = ortho_coeff_closed(n, n, &p, P).unwrap();
            assert_eq!(c.sign(), Sign::Positive);
            assert!(c.log_mag().to_f64().abs() < 1e-70);
        }
        let c10 = ortho_coeff_closed(1, 0, &p, P).unwrap();
        let nu1 = -lognormal_moment(1, &p, P);
        assert!(rel(&c10, &nu1) < 1e-70);
    }
    let p = params(0.3, 0.8);
    let closed = ortho_coeff_closed(3, 1, &p, P).unwrap();
    let oracle = ortho_coeff_oracle(3, 1, &p, P).unwrap();
    assert!(rel(&closed, &oracle) < 1e-60);
    assert!(ortho_coeff_closed(2, 3, &p, P).is_err());
}

#[test]
fn oracle_examples() {
    let p = params(0.0, 0.5);
    let c20 = ortho_coeff_oracle(2, 0, &p, P).unwrap();
    assert_eq!(c20.sign(), Sign::Positive);
    assert!((c20.log_mag().to_f64() - 1.5).abs() < 1e-14);
    let p = params(0.4, 0.9);
    let c10 = ortho_coeff_oracle(1, 0, &p, P).unwrap();
    assert!(rel(&c10, &-lognormal_moment(1, &p, P)) < 1e-60);
    // empty Hankel determinant
    assert!(hankel_oracle(0, &p, P).unwrap().log_mag().is_zero());
    assert!(hankel_closed(0, &p, P).log_mag().is_zero());
    // first-row cofactor of the 1 x 2 matrix [nu_0 nu_1] with column 0 deleted
    assert!(rel(&cofactor_oracle(1, 0, &p, P).unwrap(), &lognormal_moment(1, &p, P)) < 1e-60);
    assert!(matches!(ortho_coeff_oracle(13, 2, &p, P), Err(Error::Unsupported(_))));
}

#[test]
fn hankel_and_cofactor_product_forms() {
    let p = params(0.0, 1.0);
    assert!(hankel_closed(1, &p, P).log_mag().to_f64().abs() < 1e-70);
    for &(mu, s2) in &[(0.0, 1.0), (-0.7, 0.3), (1.1, 1.7)] {
        let p = params(mu, s2);
        for n in 0..8 {
            let d = hankel_closed(n, &p, P);
            assert!(rel(&cofactor_closed(n, n, &p, P).unwrap(), &d) < 1e-70);
            assert!(rel(&hankel_oracle(n, &p, P).unwrap(), &d) < 1e-50, "n={n}");
            for k in 0..=n {
                let a = cofactor_closed(n, k, &p, P).unwrap();
                let b = cofactor_oracle(n, k, &p, P).unwrap();
                assert!(rel(&a, &b) < 1e-50, "n={n} k={k}");
            }
        }
    }
    let d3 = hankel_closed(3, &params(0.0, 1.0), P);
    let lit = hankel_oracle(3, &params(0.0, 1.0), P).unwrap();
    assert!(rel(&d3, &lit) < 1e-60);
}

#[test]
fn vandermonde_identity() {
    assert!(vandermonde_identity_check(1, 1.0, P).unwrap());
    assert!(vandermonde_identity_check(2, 1.0, P).unwrap());
    assert!(vandermonde_identity_check(5, 0.3, P).unwrap());
    for n in 1..=10 {
        assert!(vandermonde_identity_check(n, 0.7, P).unwrap(), "n={n}");
    }
    assert!(vandermonde_identity_check(11, 0.7, P).is_err());
}

#[test]
fn poly_eval_examples() {
    let p = params(0.25, 0.6);
    let pi0 = OrthoPolynomial::new(0, &p, P).unwrap();
    assert_eq!(pi0.degree(), 0);
    assert!(poly_eval(&pi0, 3.7, P).unwrap().log_mag().is_zero());
    let pi1 = OrthoPolynomial::new(1, &p, P).unwrap();
    let nu1 = lognormal_moment(1, &p, P).to_f64();
    let v = poly_eval(&pi1, nu1, P).unwrap();
    // only the rounding of nu_1 to f64 is left
    assert!(v.is_zero() || v.to_f64().abs() < 1e-14 * nu1);
    assert!(poly_eval(&pi1, 0.0, P).is_err());
}

#[test]
fn degree_two_roots_by_bisection() {
    let p = params(0.1, 0.5);
    let pi2 = OrthoPolynomial::new(2, &p, P).unwrap();
    let f = |x: f64| poly_eval(&pi2, x, P).unwrap().to_f64();
    // pi_2 is positive at 0+ (c_{2,0} > 0) and has two positive roots.
    let mut grid: Vec<f64> = (1..4000).map(|i| i as f64 * 0.005).collect();
    grid.retain(|&x| x > 0.0);
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        if f(w[0]).signum() != f(w[1]).signum() {
            let (mut lo, mut hi) = (w[0], w[1]);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == f(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    assert_eq!(roots.len(), 2);
    let scale = pi2.coeffs()[0].to_f64();
    for r in roots {
        assert!(f(r).abs() < 1e-12 * scale, "root {r}");
    }
}

#[test]
fn normalization_examples() {
    let p = params(-0.4, 0.35);
    assert!(normalization_h(0, &p, P).unwrap().h.log_mag().to_f64().abs() < 1e-70);
    let h1 = normalization_h(1, &p, P).unwrap();
    let expect = (2.0 * -0.4 + 0.35) + (0.35f64.exp_m1()).ln();
    assert!((h1.h.log_mag().to_f64() - expect).abs() < 1e-14);
    for j in 0..16 {
        let a = normalization_h(j, &p, P).unwrap().h;
        assert!(rel(&a, &normalization_h_closed(j, &p, P)) < 1e-40, "j={j}");
    }
}

#[test]
fn normalization_matches_quadrature() {
    for &(mu, s2) in &[(0.0, 0.25), (0.5, 0.1), (-1.0, 1.0)] {
        let p = params(mu, s2);
        for j in 0..=8 {
            let pi = OrthoPolynomial::new(j, &p, P).unwrap();
            let quad = SignedLogReal::from_float(&gram_entry(&pi, &pi, &p, P).unwrap());
            let h = normalization_h(j, &p, P).unwrap().h;
            assert!(rel(&quad, &h) < 1e-8, "mu={mu} s2={s2} j={j} rel={}", rel(&quad, &h));
        }
    }
}

#[test]
fn normalization_refuses_insufficient_precision() {
    // Small sigma^2 makes the double sum cancel hardest; at 64 bits the
    // degree-16 sum cannot survive it.
    let p = params(0.0, 0.1);
    assert!(matches!(normalization_h(16, &p, 64), Err(Error::Numerical { .. })));
}

#[test]
fn orthogonality_and_diagonal_gram_matrix() {
    for &s2 in &[0.1, 0.5, 1.0] {
        let p = params(0.2, s2);
        let polys: Vec<_> = (0..=8).map(|n| OrthoPolynomial::new(n, &p, P).unwrap()).collect();
        let hs: Vec<f64> = (0..=8).map(|j| normalization_h(j, &p, P).unwrap().h.log_mag().to_f64()).collect();
        for j in 0..=8 {
            for k in j + 1..=8 {
                let g = gram_entry(&polys[j], &polys[k], &p, P).unwrap();
                let ratio = if g.is_zero() { 0.0 } else { (g.abs().ln().to_f64() - 0.5 * (hs[j] + hs[k])).exp() };
                assert!(ratio < 1e-8, "s2={s2} j={j} k={k} ratio={ratio}");
            }
        }
    }
}

#[test]
fn standard_lognormal_special_case() {
    let p = params(0.0, 1.0);
    for n in 0..=8 {
        for k in 0..=n {
            let a = ortho_coeff_closed(n, k, &p, P).unwrap();
            let b = ortho_coeff_oracle(n, k, &p, P).unwrap();
            assert_eq!(a.sign(), b.sign());
            assert!(rel(&a, &b) < 1e-20, "n={n} k={k}");
        }
    }
}

#[test]
fn smallest_coefficient_diagnostic() {
    let p = params(-2.0, 0.5);
    let pi = OrthoPolynomial::new(6, &p, P).unwrap();
    let min = pi.coeffs().iter().map(|c| c.log_mag().to_f64()).fold(f64::INFINITY, f64::min);
    assert_eq!(pi.min_log_mag(), min);
    assert!(min <= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn closed_form_equals_determinant_oracle(mu in -3.0f64..3.0, s2 in 0.05f64..2.5) {
        let p = params(mu, s2);
        for n in 0..=8 {
            for k in 0..=n {
                let a = ortho_coeff_closed(n, k, &p, P).unwrap();
                let b = ortho_coeff_oracle(n, k, &p, P).unwrap();
                prop_assert_eq!(a.sign(), b.sign());
                prop_assert!(rel(&a, &b) < 1e-20, "n={} k={} rel={}", n, k, rel(&a, &b));
                let tol = 2f64.powi(-(P as i32 / 2));
                prop_assert!(rel(&a, &b) < tol);
            }
        }
    }

    #[test]
    fn monic_with_alternating_signs(mu in -3.0f64..3.0, s2 in 0.01f64..3.0, n in 0usize..24) {
        let p = params(mu, s2);
        let pi = OrthoPolynomial::new(n, &p, P).unwrap();
        prop_assert_eq!(pi.degree(), n);
        prop_assert!(pi.coeffs()[n].log_mag().to_f64().abs() < 1e-60);
        for (k, c) in pi.coeffs().iter().enumerate() {
            prop_assert_eq!(c.sign(), Sign::from_parity(n + k));
        }
    }
}
