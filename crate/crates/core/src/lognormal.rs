//! The lognormal reference density and its monic orthogonal polynomials.
//!
//! Coefficients come from a closed form in terms of Gaussian binomials and are
//! held in the log domain; the determinant route is kept as an oracle.

use std::f64::consts::PI;

use rug::Float;

use crate::error::{Error, Result};
use crate::numerics::{determinant, ln_q_binomial, GaussLegendre, Sign, SignedLogReal};

/// Largest degree for which the determinant oracle is offered.
pub const ORACLE_MAX_DEGREE: usize = 12;

/// Parameters `(mu, sigma^2)` of the underlying Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalParams {
    mu: f64,
    sigma2: f64,
}

impl LognormalParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain("LognormalParams", format!("mu must be finite, got {mu}")));
        }
        if sigma2 == 0.0 {
            return Err(Error::domain("LognormalParams", "sigma2 = 0 gives a degenerate (point-mass) density"));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::domain("LognormalParams", format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// `q = e^{sigma^2}`, always derived.
    pub fn q(&self) -> f64 {
        self.sigma2.exp()
    }

    fn mu_mp(&self, prec: u32) -> Float {
        Float::with_val(prec, self.mu)
    }

    fn ln_q(&self, prec: u32) -> Float {
        Float::with_val(prec, self.sigma2)
    }
}

pub fn lognormal_pdf(x: f64, p: &LognormalParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("lognormal_pdf", format!("x must be positive, got {x}")));
    }
    let z = x.ln() - p.mu;
    Ok((-z * z / (2.0 * p.sigma2)).exp() / (x * (2.0 * PI * p.sigma2).sqrt()))
}

/// `nu_i = exp(i mu + i^2 sigma^2 / 2)`, with the exponent formed in MPFR.
pub fn lognormal_moment(i: usize, p: &LognormalParams, prec: u32) -> SignedLogReal {
    let i = i as u64;
    let mut e = Float::with_val(prec, p.mu) * i;
    e += Float::with_val(prec, p.sigma2) * (i * i) / 2u32;
    SignedLogReal::from_log(e)
}

fn check_range(op: &'static str, n: usize, k: usize) -> Result<()> {
    if k > n {
        return Err(Error::domain(op, format!("k = {k} outside [0, {n}]")));
    }
    Ok(())
}

/// `c_{n,k} = (-1)^{n+k} e^{(n-k) mu} q^{(n-1/2)(n-k)} [n k]_q`.
pub fn ortho_coeff_closed(n: usize, k: usize, p: &LognormalParams, prec: u32) -> Result<SignedLogReal> {
    check_range("ortho_coeff_closed", n, k)?;
    let d = (n - k) as u64;
    let mut lm = ln_q_binomial(n as i64, k as i64, &p.ln_q(prec), prec)?;
    lm += p.mu_mp(prec) * d;
    // (n - 1/2)(n - k) sigma^2 = (2n - 1)(n - k) sigma^2 / 2
    let twice = (2 * n as i64 - 1) * d as i64;
    lm += Float::with_val(prec, p.sigma2) * twice / 2u32;
    Ok(SignedLogReal::from_parts(Sign::from_parity(n + k), lm))
}

/// `ln E(n) = n(n-1) mu + sigma^2 n (2n^2 - 3n + 1) / 6`.
fn ln_e_factor(n: usize, p: &LognormalParams, prec: u32) -> Float {
    let n = n as i64;
    let mut v = p.mu_mp(prec) * (n * (n - 1));
    v += Float::with_val(prec, p.sigma2) * (n * (2 * n * n - 3 * n + 1)) / 6u32;
    v
}

/// `sum_{a<b in idx} ln(q^b - q^a)` for an increasing index set.
fn ln_vandermonde(idx: &[usize], ln_q: &Float, prec: u32) -> Float {
    let wp = prec + 16;
    let mut acc = Float::with_val(wp, 0);
    for (pos, &a) in idx.iter().enumerate() {
        for &b in &idx[pos + 1..] {
            // q^b - q^a = q^a (q^{b-a} - 1)
            acc += Float::with_val(wp, ln_q * a as u64);
            acc += Float::with_val(wp, ln_q * (b - a) as u64).exp_m1().ln();
        }
    }
    Float::with_val(prec, &acc)
}

/// The Hankel determinant `Delta_n = |nu_{i+j}|_{i,j<n}` from its product form.
pub fn hankel_closed(n: usize, p: &LognormalParams, prec: u32) -> SignedLogReal {
    let idx: Vec<usize> = (0..n).collect();
    let lm = ln_e_factor(n, p, prec) + ln_vandermonde(&idx, &p.ln_q(prec), prec);
    SignedLogReal::from_log(lm)
}

/// The cofactor `Delta_{n,k}` of `x^k` from its product form.
pub fn cofactor_closed(n: usize, k: usize, p: &LognormalParams, prec: u32) -> Result<SignedLogReal> {
    check_range("cofactor_closed", n, k)?;
    let idx: Vec<usize> = (0..=n).filter(|&j| j != k).collect();
    let mut lm = ln_e_factor(n, p, prec) + ln_vandermonde(&idx, &p.ln_q(prec), prec);
    lm += lognormal_moment(n, p, prec).log_mag();
    lm -= lognormal_moment(k, p, prec).log_mag();
    Ok(SignedLogReal::from_log(lm))
}

/// Precision for literal determinants: enough to hold the spread of the
/// moment matrix entries on top of `prec`.
fn oracle_bits(n: usize, p: &LognormalParams, prec: u32) -> u32 {
    let top = 2.0 * n as f64;
    let spread = (top * p.mu.abs() + 0.5 * top * top * p.sigma2) / std::f64::consts::LN_2;
    prec + 64 + spread.ceil() as u32
}

fn moment_matrix(rows: usize, cols: &[usize], p: &LognormalParams, wp: u32) -> Vec<Vec<Float>> {
    (0..rows).map(|i| cols.iter().map(|&j| lognormal_moment(i + j, p, wp).to_float(wp)).collect()).collect()
}

fn check_oracle_cap(op: &str, n: usize) -> Result<()> {
    if n > ORACLE_MAX_DEGREE {
        return Err(Error::Unsupported(format!("{op}: degree {n} exceeds oracle cap {ORACLE_MAX_DEGREE}")));
    }
    Ok(())
}

/// `Delta_n` by literal elimination on the moment matrix.
pub fn hankel_oracle(n: usize, p: &LognormalParams, prec: u32) -> Result<SignedLogReal> {
    check_oracle_cap("hankel_oracle", n)?;
    let wp = oracle_bits(n, p, prec);
    let cols: Vec<usize> = (0..n).collect();
    Ok(SignedLogReal::from_float(&determinant(moment_matrix(n, &cols, p, wp), wp)))
}

/// `Delta_{n,k}` by literal elimination: rows `0..n`, columns `0..=n` without `k`.
pub fn cofactor_oracle(n: usize, k: usize, p: &LognormalParams, prec: u32) -> Result<SignedLogReal> {
    check_range("cofactor_oracle", n, k)?;
    check_oracle_cap("cofactor_oracle", n)?;
    let wp = oracle_bits(n, p, prec);
    let cols: Vec<usize> = (0..=n).filter(|&j| j != k).collect();
    Ok(SignedLogReal::from_float(&determinant(moment_matrix(n, &cols, p, wp), wp)))
}

/// `c_{n,k} = (-1)^{n+k} Delta_{n,k} / Delta_n` from literal determinants.
pub fn ortho_coeff_oracle(n: usize, k: usize, p: &LognormalParams, prec: u32) -> Result<SignedLogReal> {
    let cof = cofactor_oracle(n, k, p, prec)?;
    let det = hankel_oracle(n, p, prec)?;
    if det.sign() != Sign::Positive || cof.sign() != Sign::Positive {
        return Err(Error::numerical("ortho_coeff_oracle", "determinant lost its sign; raise working_bits"));
    }
    let ratio = &cof / &det;
    let lm = Float::with_val(prec, ratio.log_mag());
    Ok(SignedLogReal::from_parts(Sign::from_parity(n + k), lm))
}

/// Checks `|q^{ij}|` against the product of differences for every column
/// deletion `k = 0..=n` of the `n x (n+1)` matrix (`k = n` is the square case).
pub fn vandermonde_identity_check(n: usize, sigma2: f64, prec: u32) -> Result<bool> {
    let tol = Float::with_val(prec, 1) >> (prec / 2);
    Ok(vandermonde_max_deviation(n, sigma2, prec)? <= tol)
}

/// Largest relative gap between the `q`-power determinants and their
/// Vandermonde products over every deleted column, at `2 * prec` bits.
pub fn vandermonde_max_deviation(n: usize, sigma2: f64, prec: u32) -> Result<Float> {
    if n == 0 || n > 10 {
        return Err(Error::domain("vandermonde_identity_check", format!("n must be in 1..=10, got {n}")));
    }
    let p = LognormalParams::new(0.0, sigma2)?;
    let wp = 2 * prec;
    let ln_q = p.ln_q(wp);
    let mut worst = Float::with_val(prec, 0);
    for k in 0..=n {
        let cols: Vec<usize> = (0..=n).filter(|&j| j != k).collect();
        let m: Vec<Vec<Float>> =
            (0..n).map(|i| cols.iter().map(|&j| Float::with_val(wp, &ln_q * (i * j) as u64).exp()).collect()).collect();
        let lhs = determinant(m, wp);
        let rhs = ln_vandermonde(&cols, &ln_q, wp).exp();
        let rel = (Float::with_val(wp, &lhs - &rhs) / &rhs).abs();
        if rel > worst {
            worst = Float::with_val(prec, rel);
        }
    }
    Ok(worst)
}

/// A monic orthogonal polynomial `pi_n` with coefficients `c_{n,0..n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoPolynomial {
    coeffs: Vec<SignedLogReal>,
}

impl OrthoPolynomial {
    /// Builds `pi_n` from the closed-form coefficients.
    pub fn new(n: usize, p: &LognormalParams, prec: u32) -> Result<Self> {
        let coeffs = (0..=n).map(|k| ortho_coeff_closed(n, k, p, prec)).collect::<Result<_>>()?;
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[SignedLogReal] {
        &self.coeffs
    }

    /// Smallest `ln|c_{n,k}|`, a cheap indicator of the dynamic range the
    /// working precision must absorb.
    pub fn min_log_mag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.log_mag().to_f64()).fold(f64::INFINITY, f64::min)
    }
}

/// `sum_k c_{n,k} x^k` at a positive `x`.
pub fn poly_eval(poly: &OrthoPolynomial, x: f64, prec: u32) -> Result<SignedLogReal> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("poly_eval", format!("x must be positive, got {x}")));
    }
    Ok(SignedLogReal::from_float(&poly_eval_mp(poly, &Float::with_val(prec, x), prec)))
}

fn poly_eval_mp(poly: &OrthoPolynomial, x: &Float, prec: u32) -> Float {
    let wp = prec + 32;
    let lnx = Float::with_val(wp, x.ln_ref());
    let terms: Vec<SignedLogReal> =
        poly.coeffs.iter().enumerate().map(|(k, c)| c.scale_exp(&Float::with_val(wp, &lnx * k as u64))).collect();
    SignedLogReal::sum(&terms, wp).to_float(prec)
}

/// `h_j = int pi_j^2 f_LN`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationFactor {
    pub j: usize,
    pub h: SignedLogReal,
}

/// `h_j = sum_i sum_k c_{j,i} c_{j,k} nu_{i+k}`.
///
/// The terms cancel heavily; if fewer than 64 bits survive the cancellation
/// the result is refused with a request for more working bits.
pub fn normalization_h(j: usize, p: &LognormalParams, prec: u32) -> Result<NormalizationFactor> {
    const OP: &str = "normalization_h";
    let wp = prec + 32;
    let poly = OrthoPolynomial::new(j, p, wp)?;
    let mut terms = Vec::with_capacity((j + 1) * (j + 1));
    for (i, ci) in poly.coeffs.iter().enumerate() {
        for (k, ck) in poly.coeffs.iter().enumerate() {
            terms.push(&(ci * ck) * &lognormal_moment(i + k, p, wp));
        }
    }
    let h = SignedLogReal::sum(&terms, wp);
    if h.sign() != Sign::Positive {
        return Err(Error::numerical(OP, format!("h_{j} is not positive at {prec} bits; raise working_bits")));
    }
    let largest = terms.iter().map(|t| t.log_mag().to_f64()).fold(f64::NEG_INFINITY, f64::max);
    let lost_bits = (largest - h.log_mag().to_f64()) / std::f64::consts::LN_2;
    if lost_bits > f64::from(wp) - 64.0 {
        return Err(Error::numerical(
            OP,
            format!("h_{j} lost {lost_bits:.0} of {wp} bits to cancellation; raise working_bits"),
        ));
    }
    let h = SignedLogReal::from_log(Float::with_val(prec, h.log_mag()));
    Ok(NormalizationFactor { j, h })
}

/// `h_j = Delta_{j+1} / Delta_j = (E(j+1)/E(j)) prod_{i<j} (q^j - q^i)`,
/// free of cancellation. Used to cross-check [`normalization_h`].
pub fn normalization_h_closed(j: usize, p: &LognormalParams, prec: u32) -> SignedLogReal {
    &hankel_closed(j + 1, p, prec) / &hankel_closed(j, p, prec)
}

/// `E[g(X)]` for `X ~ LN(mu, sigma^2)` restricted to `ln X` in
/// `mu + sigma [lo, hi]`, by composite Gauss–Legendre in the Gaussian variable.
pub fn lognormal_expectation<G>(p: &LognormalParams, lo: f64, hi: f64, prec: u32, mut g: G) -> Result<Float>
where
    G: FnMut(&Float) -> Result<Float>,
{
    let rule = GaussLegendre::new(20)?;
    let panels = (2.0 * (hi - lo)).ceil().max(1.0) as usize;
    let mu = p.mu_mp(prec);
    let sigma = Float::with_val(prec, p.sigma2).sqrt();
    let norm = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let norm = norm.sqrt().recip();
    rule.integrate_mp(lo, hi, panels, prec, |u| {
        let x = Float::with_val(prec, &sigma * u) + &mu;
        let x = x.exp();
        let w = Float::with_val(prec, -0.5 * u * u).exp() * &norm;
        Ok(g(&x)? * w)
    })
}

/// `int pi_j pi_k f_LN` by quadrature, over `u in [-12, 12 + (j+k) sigma]`.
/// The upper end follows the peak of `x^{j+k} f_LN`, which sits at
/// `u = (j+k) sigma`.
pub fn gram_entry(a: &OrthoPolynomial, b: &OrthoPolynomial, p: &LognormalParams, prec: u32) -> Result<Float> {
    let hi = 12.0 + (a.degree() + b.degree()) as f64 * p.sigma();
    lognormal_expectation(p, -12.0, hi, prec, |x| Ok(poly_eval_mp(a, x, prec) * poly_eval_mp(b, x, prec)))
}
