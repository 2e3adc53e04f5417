//! Moments and lognormal fit for products of Nakagami-m amplitudes.
//!
//! Correlation follows the single-integral joint model in which
//! `R_i^2 = (Omega_i / 2m) sum_l (lambda_i U_l + sqrt(1 - lambda_i^2) V_{il})^2`
//! over `2m` shared Gaussians `U_l`: conditioned on the shared part every
//! factor is independent, and the conditioning variable integrates out
//! against `t^{m-1} e^{-t}`. The power correlation of two factors is
//! `lambda_i^2 lambda_j^2`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use rug::Float;

use crate::approx::{ApproximantModel, MomentSequence};
use crate::error::{Error, Result};
use crate::lognormal::LognormalParams;
use crate::numerics::{
    integrate_laguerre, kummer_1f1_da_at_zero, kummer_1f1_neg_half, ln_gamma, polygamma, LaguerreCache,
    PrecisionConfig, SignedLogReal,
};

/// Largest `lambda` treated as exactly independent.
pub const INDEPENDENCE_THRESHOLD: f64 = 1e-14;
/// Quadrature stops doubling once successive rules agree to this.
pub const QUADRATURE_REL_TOL: f64 = 1e-10;
/// Node-count cap for the doubling.
pub const QUADRATURE_MAX_NODES: usize = 1024;

/// Fading parameter(s). Per-factor values exist only for independent
/// factors; the correlated model needs a common `m`.
#[derive(Debug, Clone, PartialEq)]
enum Fading {
    Common(f64),
    PerFactor(Vec<f64>),
}

/// `P = prod_i R_i` with `R_i ~ Nakagami(m, Omega_i)` and correlation
/// parameters `lambda_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NakagamiProductSpec {
    m: Fading,
    omega: Vec<f64>,
    lambda: Vec<f64>,
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() || (2.0 * m).fract() != 0.0 {
        return Err(Error::domain(
            "NakagamiProductSpec",
            format!("m must be a positive integer or half-integer, got {m}"),
        ));
    }
    Ok(())
}

fn check_omega(omega: &[f64]) -> Result<()> {
    if omega.is_empty() {
        return Err(Error::domain("NakagamiProductSpec", "need at least one factor"));
    }
    if let Some(w) = omega.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::domain("NakagamiProductSpec", format!("omega must be positive, got {w}")));
    }
    Ok(())
}

impl NakagamiProductSpec {
    /// Common `m`, one `omega` and one `lambda` per factor.
    pub fn new(m: f64, omega: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        check_m(m)?;
        check_omega(&omega)?;
        if lambda.len() != omega.len() {
            return Err(Error::domain(
                "NakagamiProductSpec",
                format!("{} omega values but {} lambda values", omega.len(), lambda.len()),
            ));
        }
        if let Some(l) = lambda.iter().find(|l| !(**l >= 0.0 && **l < 1.0)) {
            return Err(Error::domain("NakagamiProductSpec", format!("lambda must lie in [0, 1), got {l}")));
        }
        Ok(Self { m: Fading::Common(m), omega, lambda })
    }

    /// `K` independent factors with a common `m`.
    pub fn independent(k: usize, m: f64, omega: f64) -> Result<Self> {
        Self::new(m, vec![omega; k], vec![0.0; k])
    }

    /// Equal power correlation `rho` between every pair, `lambda_i = rho^{1/4}`.
    pub fn equicorrelated(k: usize, m: f64, omega: f64, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::domain("NakagamiProductSpec", format!("rho must lie in [0, 1), got {rho}")));
        }
        Self::new(m, vec![omega; k], vec![rho.powf(0.25); k])
    }

    /// Independent factors with their own `m_i`.
    pub fn independent_heterogeneous(m: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        check_omega(&omega)?;
        if m.len() != omega.len() {
            return Err(Error::domain("NakagamiProductSpec", "one m per factor required"));
        }
        for &mi in &m {
            check_m(mi)?;
        }
        let k = m.len();
        Ok(Self { m: Fading::PerFactor(m), omega, lambda: vec![0.0; k] })
    }

    pub fn k(&self) -> usize {
        self.omega.len()
    }

    /// The common `m`, if there is one.
    pub fn common_m(&self) -> Option<f64> {
        match &self.m {
            Fading::Common(m) => Some(*m),
            Fading::PerFactor(v) if v.iter().all(|x| *x == v[0]) => Some(v[0]),
            Fading::PerFactor(_) => None,
        }
    }

    pub fn m_of(&self, i: usize) -> f64 {
        match &self.m {
            Fading::Common(m) => *m,
            Fading::PerFactor(v) => v[i],
        }
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Power correlation `lambda_i^2 lambda_j^2`.
    pub fn rho(&self, i: usize, j: usize) -> f64 {
        (self.lambda[i] * self.lambda[j]).powi(2)
    }

    pub fn is_independent(&self) -> bool {
        self.lambda.iter().all(|&l| l < INDEPENDENCE_THRESHOLD)
    }

    /// Same spec with every `Omega_i` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut s = self.clone();
        s.omega.iter_mut().for_each(|w| *w *= c);
        check_omega(&s.omega)?;
        Ok(s)
    }
}

fn shared_cache() -> &'static LaguerreCache {
    static CACHE: OnceLock<LaguerreCache> = OnceLock::new();
    CACHE.get_or_init(LaguerreCache::new)
}

fn half_k(prec: u32, m: f64, k: usize) -> Float {
    Float::with_val(prec, m) + Float::with_val(prec, k as f64 / 2.0)
}

/// `ln[Gamma(m + k/2) / Gamma(m)] + (k/2) ln(Omega / m)`, the log of one
/// independent factor's `k`-th moment.
fn ln_factor_moment(k: usize, m: f64, omega: f64, prec: u32) -> Result<Float> {
    let mf = Float::with_val(prec, m);
    let mut v = ln_gamma(&half_k(prec, m, k), prec)? - ln_gamma(&mf, prec)?;
    let ratio = Float::with_val(prec, omega) / &mf;
    v += ratio.ln() * (k as f64 / 2.0);
    Ok(v)
}

/// `M(k) = prod_i [Gamma(m_i + k/2)/Gamma(m_i)] (Omega_i/m_i)^{k/2}`.
pub fn product_moment_indep(k: usize, spec: &NakagamiProductSpec, prec: u32) -> Result<SignedLogReal> {
    if !spec.is_independent() {
        return Err(Error::domain("product_moment_indep", "spec has non-zero lambda"));
    }
    let mut acc = Float::with_val(prec, 0);
    for i in 0..spec.k() {
        acc += ln_factor_moment(k, spec.m_of(i), spec.omega[i], prec)?;
    }
    Ok(SignedLogReal::from_log(acc))
}

fn require_common_m(op: &'static str, spec: &NakagamiProductSpec) -> Result<f64> {
    spec.common_m().ok_or_else(|| Error::domain(op, "the correlated model needs a common m"))
}

/// Distinct `lambda` values with their multiplicities.
fn lambda_groups(spec: &NakagamiProductSpec) -> Vec<(f64, u32)> {
    let mut g: BTreeMap<u64, (f64, u32)> = BTreeMap::new();
    for &l in &spec.lambda {
        g.entry(l.to_bits()).or_insert((l, 0)).1 += 1;
    }
    g.into_values().collect()
}

/// `z = lambda^2 t / (lambda^2 - 1)` as a multiplier of `t`.
fn z_slope(lambda: f64, prec: u32) -> Float {
    let l2 = Float::with_val(prec, lambda).square();
    let den = Float::with_val(prec, &l2 - 1u32);
    l2 / den
}

/// Correlated product moment. The quadrature weight is `t^{m-1} e^{-t}`
/// itself, so the rule's weights sum to `Gamma(m)`, which cancels one
/// power of `Gamma(m)` in the prefactor.
pub fn product_moment_corr(k: usize, spec: &NakagamiProductSpec, cfg: &PrecisionConfig) -> Result<SignedLogReal> {
    const OP: &str = "product_moment_corr";
    let m = require_common_m(OP, spec)?;
    let prec = cfg.working_bits();
    if k == 0 {
        return Ok(SignedLogReal::one(prec));
    }
    let mf = Float::with_val(prec, m);
    let groups: Vec<(Float, u32)> = lambda_groups(spec).into_iter().map(|(l, c)| (z_slope(l, prec), c)).collect();
    let integrand = |t: &Float| -> Result<Float> {
        let mut prod = Float::with_val(prec, 1);
        for (slope, count) in &groups {
            if slope.is_zero() {
                continue;
            }
            let z = Float::with_val(prec, slope * t);
            let f = kummer_1f1_neg_half(k as u32, &mf, &z, prec)?;
            prod *= rug::ops::Pow::pow(f, *count);
        }
        Ok(prod)
    };
    let integral = integrate_laguerre(
        shared_cache(),
        m - 1.0,
        cfg.quadrature_nodes(),
        QUADRATURE_MAX_NODES.max(cfg.quadrature_nodes()),
        QUADRATURE_REL_TOL,
        prec,
        integrand,
    )?;
    if integral.value.cmp0() != Some(std::cmp::Ordering::Greater) {
        return Err(Error::numerical(OP, format!("non-positive moment integral for k = {k}")));
    }
    let kk = spec.k() as u32;
    let mut lm = Float::with_val(prec, integral.value.ln_ref()) - ln_gamma(&mf, prec)?;
    let ln_ratio = ln_gamma(&half_k(prec, m, k), prec)? - ln_gamma(&mf, prec)?;
    lm += ln_ratio * kk;
    lm -= Float::with_val(prec, mf.ln_ref()) * (kk as f64 * k as f64 / 2.0);
    for (w, l) in spec.omega.iter().zip(&spec.lambda) {
        let l2 = Float::with_val(prec, *l).square();
        let base = Float::with_val(prec, 1u32 - l2) * *w;
        lm += base.ln() * (k as f64 / 2.0);
    }
    Ok(SignedLogReal::from_log(lm))
}

/// Dispatches to the independent closed form when every `lambda` is below
/// [`INDEPENDENCE_THRESHOLD`].
pub fn product_moment(k: usize, spec: &NakagamiProductSpec, cfg: &PrecisionConfig) -> Result<SignedLogReal> {
    if spec.is_independent() {
        product_moment_indep(k, spec, cfg.working_bits())
    } else {
        product_moment_corr(k, spec, cfg)
    }
}

/// `zeta_i = E[ln R_i] = (Psi_0(m_i) - ln(m_i / Omega_i)) / 2`.
pub fn factor_log_means(spec: &NakagamiProductSpec, prec: u32) -> Result<Vec<Float>> {
    (0..spec.k())
        .map(|i| {
            let m = Float::with_val(prec, spec.m_of(i));
            let psi = polygamma(0, &m, prec)?;
            let ln_ratio = (m / spec.omega[i]).ln();
            Ok((psi - ln_ratio) / 2u32)
        })
        .collect()
}

/// `mu = sum_i zeta_i`; `lambda` plays no part.
pub fn log_mean_mu(spec: &NakagamiProductSpec, prec: u32) -> Result<f64> {
    let mut acc = Float::with_val(prec, 0);
    for z in factor_log_means(spec, prec)? {
        acc += z;
    }
    Ok(acc.to_f64())
}

fn log_var_diag(spec: &NakagamiProductSpec, prec: u32) -> Result<Float> {
    let mut acc = Float::with_val(prec, 0);
    for i in 0..spec.k() {
        acc += polygamma(1, &Float::with_val(prec, spec.m_of(i)), prec)?;
    }
    Ok(acc / 4u32)
}

/// `sigma^2 = (1/4) sum_i Psi_1(m_i)`.
pub fn log_var_indep(spec: &NakagamiProductSpec, prec: u32) -> Result<f64> {
    if !spec.is_independent() {
        return Err(Error::domain("log_var_indep", "spec has non-zero lambda"));
    }
    Ok(log_var_diag(spec, prec)?.to_f64())
}

/// `Cov[ln R_i, ln R_j]` for every `i < j`, keyed by position.
///
/// With `I_i(t) = E[ln R_i^2 | t]`, the covariance is
/// `int I_i I_j t^{m-1} e^{-t} / (4 Gamma(m)) dt - zeta_i zeta_j`.
pub fn log_covariances(spec: &NakagamiProductSpec, cfg: &PrecisionConfig) -> Result<Vec<((usize, usize), f64)>> {
    const OP: &str = "log_var_corr";
    let m = require_common_m(OP, spec)?;
    let prec = cfg.working_bits();
    let mf = Float::with_val(prec, m);
    let psi0 = polygamma(0, &mf, prec)?;
    let zeta = factor_log_means(spec, prec)?;
    let ln_gamma_m = ln_gamma(&mf, prec)?;
    // The integral depends on (lambda_i, Omega_i, lambda_j, Omega_j) only.
    let mut distinct: BTreeMap<[u64; 4], Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..spec.k() {
        for j in i + 1..spec.k() {
            let key = [spec.lambda[i], spec.omega[i], spec.lambda[j], spec.omega[j]].map(f64::to_bits);
            distinct.entry(key).or_default().push((i, j));
        }
    }
    let offset = |i: usize| -> Float {
        let l2 = Float::with_val(prec, spec.lambda[i]).square();
        let base = Float::with_val(prec, 1u32 - l2) * spec.omega[i] / &mf;
        Float::with_val(prec, &psi0 + base.ln())
    };
    let keyed: Vec<_> = distinct.into_values().collect();
    let values = keyed
        .par_iter()
        .map(|pairs| {
            let (i, j) = pairs[0];
            let (ci, cj) = (offset(i), offset(j));
            let (si, sj) = (z_slope(spec.lambda[i], prec), z_slope(spec.lambda[j], prec));
            let big_i = |c: &Float, s: &Float, t: &Float| -> Result<Float> {
                if s.is_zero() {
                    return Ok(c.clone());
                }
                let z = Float::with_val(prec, s * t);
                Ok(Float::with_val(prec, c - kummer_1f1_da_at_zero(&mf, &z, prec)?))
            };
            let integral = integrate_laguerre(
                shared_cache(),
                m - 1.0,
                cfg.quadrature_nodes(),
                QUADRATURE_MAX_NODES.max(cfg.quadrature_nodes()),
                QUADRATURE_REL_TOL,
                prec,
                |t| Ok(big_i(&ci, &si, t)? * big_i(&cj, &sj, t)?),
            )?;
            let normalized = integral.value / ln_gamma_m.clone().exp() / 4u32;
            let cov = normalized - Float::with_val(prec, &zeta[i] * &zeta[j]);
            Ok((pairs.clone(), cov.to_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<((usize, usize), f64)> =
        values.into_iter().flat_map(|(pairs, c)| pairs.into_iter().map(move |p| (p, c))).collect();
    out.sort_by_key(|(p, _)| *p);
    Ok(out)
}

/// `sigma^2 = (1/4) sum_i Psi_1(m) + 2 sum_{i<j} Cov[ln R_i, ln R_j]`.
pub fn log_var_corr(spec: &NakagamiProductSpec, cfg: &PrecisionConfig) -> Result<f64> {
    let diag = log_var_diag(spec, cfg.working_bits())?.to_f64();
    let cov: f64 = log_covariances(spec, cfg)?.iter().map(|(_, c)| c).sum();
    let v = diag + 2.0 * cov;
    if !(v > 0.0) {
        return Err(Error::numerical("log_var_corr", format!("non-positive variance {v}")));
    }
    Ok(v)
}

/// Everything the approximant needs for a product spec.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub mu: f64,
    pub sigma2: f64,
    pub moments: MomentSequence,
    /// Per-factor log-means.
    pub zeta: Vec<f64>,
}

impl FitResult {
    pub fn params(&self) -> Result<LognormalParams> {
        LognormalParams::new(self.mu, self.sigma2)
    }
}

/// Moments `M(0..=n)`, `mu` and `sigma^2` for `spec`.
pub fn fit_product(spec: &NakagamiProductSpec, n: usize, cfg: &PrecisionConfig) -> Result<FitResult> {
    let prec = cfg.working_bits();
    let values = (0..=n).into_par_iter().map(|k| product_moment(k, spec, cfg)).collect::<Result<Vec<_>>>()?;
    let moments = MomentSequence::new(values)?;
    let mu = log_mean_mu(spec, prec)?;
    let sigma2 = if spec.is_independent() { log_var_indep(spec, prec)? } else { log_var_corr(spec, cfg)? };
    let zeta = factor_log_means(spec, prec)?.iter().map(Float::to_f64).collect();
    Ok(FitResult { mu, sigma2, moments, zeta })
}

/// Degree-`n` approximant for the distribution of the product.
pub fn build_product_approximant(
    spec: &NakagamiProductSpec,
    n: usize,
    cfg: &PrecisionConfig,
) -> Result<ApproximantModel> {
    if n == 0 {
        return Err(Error::domain("build_product_approximant", "degree must be at least 1"));
    }
    let fit = fit_product(spec, n, cfg)?;
    ApproximantModel::fit(&fit.moments, &fit.params()?, cfg.working_bits())
}
