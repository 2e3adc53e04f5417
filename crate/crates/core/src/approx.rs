//! Moment-matched approximation of a positive random variable around a
//! lognormal reference density.
//!
//! With `pi_i` the orthogonal polynomials of the reference, the density is
//! approximated by `f_LN(x) sum_i eta_i pi_i(x)` where
//! `eta_i = (1/h_i) sum_k c_{i,k} M(k)`. Regrouping by powers of `x` gives
//! `f_LN(x) sum_i xi_i x^i`, and `x^i f_LN(x; mu) = nu_i f_LN(x; mu + i sigma^2)`
//! turns every term into a shifted lognormal weighted by the tame product
//! `xi_i nu_i`. Only those products are rounded to `f64`.

use std::io::{BufRead, Write};

use rug::Float;

use crate::error::{Error, Result};
use crate::lognormal::{lognormal_moment, normalization_h, ortho_coeff_closed, LognormalParams};
use crate::numerics::{std_normal_cdf, std_normal_sf, GaussLegendre, GaussLegendreMp, Sign, SignedLogReal};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Target moments `M(0..=N)`, with `M(0) = 1` and every `M(k) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    values: Vec<SignedLogReal>,
}

impl MomentSequence {
    pub fn new(values: Vec<SignedLogReal>) -> Result<Self> {
        const OP: &str = "MomentSequence";
        let first = values.first().ok_or_else(|| Error::domain(OP, "need at least M(0)"))?;
        let tol = 2f64.powi(-(first.prec() as i32 / 2));
        if first.sign() != Sign::Positive || first.log_mag().to_f64().abs() > tol {
            return Err(Error::domain(OP, format!("M(0) must be 1, got {first}")));
        }
        if let Some(k) = values.iter().position(|v| v.sign() != Sign::Positive) {
            return Err(Error::domain(OP, format!("M({k}) must be positive")));
        }
        Ok(Self { values })
    }

    /// The moments `nu_0..nu_n` of the lognormal itself.
    pub fn from_lognormal(p: &LognormalParams, n: usize, prec: u32) -> Self {
        Self { values: (0..=n).map(|i| lognormal_moment(i, p, prec)).collect() }
    }

    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[SignedLogReal] {
        &self.values
    }

    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.degree() {
            return Err(Error::domain(
                "MomentSequence::truncate",
                format!("have {} moments, asked for degree {n}", self.values.len()),
            ));
        }
        Ok(Self { values: self.values[..=n].to_vec() })
    }
}

/// Triangular table `c[n][k]` of closed-form coefficients for `n <= max`.
fn coeff_table(max: usize, p: &LognormalParams, prec: u32) -> Result<Vec<Vec<SignedLogReal>>> {
    (0..=max).map(|n| (0..=n).map(|k| ortho_coeff_closed(n, k, p, prec)).collect()).collect()
}

/// `eta_i = (1/h_i) sum_{k<=i} c_{i,k} M(k)` for `i = 0..=N`.
pub fn fit_eta(moments: &MomentSequence, p: &LognormalParams, prec: u32) -> Result<Vec<SignedLogReal>> {
    let wp = prec + 32;
    let c = coeff_table(moments.degree(), p, wp)?;
    (0..=moments.degree())
        .map(|i| {
            let terms: Vec<SignedLogReal> = (0..=i).map(|k| &c[i][k] * &moments.values[k]).collect();
            let s = SignedLogReal::sum(&terms, wp);
            let h = normalization_h(i, p, prec)?.h;
            Ok(&s / &h)
        })
        .collect()
}

/// `xi_j = sum_{k=j}^{N} c_{k,j} eta_k`. Checks that `sum_i xi_i nu_i`
/// returns `eta_0`, which it does identically because `int pi_k f_LN = 0`
/// for `k >= 1`; a failure means the working precision was swamped.
pub fn eta_to_xi(eta: &[SignedLogReal], p: &LognormalParams, prec: u32) -> Result<Vec<SignedLogReal>> {
    const OP: &str = "eta_to_xi";
    if eta.is_empty() {
        return Err(Error::domain(OP, "eta is empty"));
    }
    let n = eta.len() - 1;
    let wp = prec + 32;
    let c = coeff_table(n, p, wp)?;
    let xi: Vec<SignedLogReal> = (0..=n)
        .map(|j| {
            let terms: Vec<SignedLogReal> = (j..=n).map(|k| &c[k][j] * &eta[k]).collect();
            SignedLogReal::sum(&terms, wp)
        })
        .collect();
    let xinu: Vec<SignedLogReal> = xi.iter().enumerate().map(|(i, x)| x * &lognormal_moment(i, p, wp)).collect();
    let total = SignedLogReal::sum(&xinu, wp);
    let scale = xinu.iter().chain(std::iter::once(&eta[0])).fold(0.0f64, |m, t| m.max(t.log_mag().to_f64()));
    let err = total.sub(&eta[0]);
    if !err.is_zero() {
        let lost = (err.log_mag().to_f64() - scale) / std::f64::consts::LN_2;
        if lost > -f64::from(prec / 2) {
            return Err(Error::numerical(
                OP,
                format!("sum xi_i nu_i misses eta_0 by 2^{lost:.0} relative; raise working_bits"),
            ));
        }
    }
    Ok(xi.into_iter().map(|x| SignedLogReal::from_float(&x.to_float(prec))).collect())
}

/// The fitted approximant. Evaluation uses only `params` and `xinu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximantModel {
    params: LognormalParams,
    eta: Vec<SignedLogReal>,
    xi: Vec<SignedLogReal>,
    /// `xi_i nu_i` before rounding; empty for imported models.
    xinu_exact: Vec<SignedLogReal>,
    xinu: Vec<f64>,
}

/// A density value with a flag for the negative excursions a truncated
/// polynomial correction can produce in the tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfValue {
    pub value: f64,
    pub negative: bool,
}

impl ApproximantModel {
    /// Fits the degree-`N` model to `moments` (degree taken from the sequence).
    pub fn fit(moments: &MomentSequence, p: &LognormalParams, prec: u32) -> Result<Self> {
        let eta = fit_eta(moments, p, prec)?;
        Self::from_eta(eta, p, prec)
    }

    fn from_eta(eta: Vec<SignedLogReal>, p: &LognormalParams, prec: u32) -> Result<Self> {
        let xi = eta_to_xi(&eta, p, prec)?;
        let xinu_exact: Vec<SignedLogReal> =
            xi.iter().enumerate().map(|(i, x)| x * &lognormal_moment(i, p, prec)).collect();
        let xinu = xinu_exact.iter().map(SignedLogReal::to_f64).collect();
        Ok(Self { params: *p, eta, xi, xinu_exact, xinu })
    }

    /// Rebuilds an evaluable model from exported `xi_i nu_i` values.
    pub fn from_xinu(params: LognormalParams, xinu: Vec<f64>) -> Result<Self> {
        if xinu.is_empty() || xinu.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("ApproximantModel::from_xinu", "need finite coefficients"));
        }
        Ok(Self { params, eta: Vec::new(), xi: Vec::new(), xinu_exact: Vec::new(), xinu })
    }

    pub fn degree(&self) -> usize {
        self.xinu.len() - 1
    }

    pub fn params(&self) -> &LognormalParams {
        &self.params
    }

    /// Empty for models rebuilt with [`from_xinu`](Self::from_xinu).
    pub fn eta(&self) -> &[SignedLogReal] {
        &self.eta
    }

    pub fn xi(&self) -> &[SignedLogReal] {
        &self.xi
    }

    pub fn xinu(&self) -> &[f64] {
        &self.xinu
    }

    /// `sum_i xi_i nu_i`, the limit of the CDF at infinity.
    pub fn xinu_sum(&self) -> f64 {
        self.xinu.iter().sum()
    }

    fn z(&self, x: f64, op: &'static str) -> Result<f64> {
        if !(x > 0.0) || x.is_nan() {
            return Err(Error::domain(op, format!("x must be positive, got {x}")));
        }
        Ok((x.ln() - self.params.mu()) / self.params.sigma())
    }

    /// Density of `Z = (ln X - mu)/sigma`: `sum_i xinu_i phi(z - i sigma)`.
    fn z_density(&self, z: f64) -> f64 {
        let s = self.params.sigma();
        self.xinu
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let d = z - i as f64 * s;
                w * (-0.5 * d * d).exp()
            })
            .sum::<f64>()
            * INV_SQRT_2PI
    }

    /// [`z_density`](Self::z_density) with the unrounded `xi_i nu_i`.
    fn z_density_mp(&self, z: &Float, prec: u32) -> Float {
        if self.xinu_exact.is_empty() {
            return Float::with_val(prec, self.z_density(z.to_f64()));
        }
        let s = Float::with_val(prec, self.params.sigma2()).sqrt();
        let mut acc = Float::with_val(prec, 0);
        for (i, w) in self.xinu_exact.iter().enumerate() {
            let d = Float::with_val(prec, z - Float::with_val(prec, &s * i as u32));
            let e = Float::with_val(prec, d.square_ref()) / -2i32;
            acc += w.to_float(prec) * e.exp();
        }
        let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
        acc / two_pi.sqrt()
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        let z = self.z(x, "approx_pdf")?;
        if x.is_infinite() {
            return Ok(0.0);
        }
        Ok(self.z_density(z) / (self.params.sigma() * x))
    }

    pub fn pdf_eval(&self, x: f64) -> Result<PdfValue> {
        let value = self.pdf(x)?;
        Ok(PdfValue { value, negative: value < 0.0 })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let z = self.z(x, "approx_cdf")?;
        let s = self.params.sigma();
        Ok(self.xinu.iter().enumerate().map(|(i, w)| w * std_normal_cdf(z - i as f64 * s)).sum())
    }

    /// `1 - F(x)`, formed as `(1 - sum xinu) + sum xinu_i Phi(i sigma - z)` so
    /// that tail values keep their relative accuracy.
    pub fn ccdf(&self, x: f64) -> Result<f64> {
        let z = self.z(x, "approx_ccdf")?;
        let s = self.params.sigma();
        let tail: f64 = self.xinu.iter().enumerate().map(|(i, w)| w * std_normal_sf(z - i as f64 * s)).sum();
        Ok((1.0 - self.xinu_sum()) + tail)
    }

    /// `z`-window holding essentially all of the density's mass.
    fn z_window(&self) -> (f64, f64) {
        (-12.0, 12.0 + self.degree() as f64 * self.params.sigma())
    }

    /// Worst negative density excursion and the total negative mass.
    pub fn negative_excursion(&self) -> NegativeExcursion {
        let (lo, hi) = self.z_window();
        let steps = ((hi - lo) * 100.0).ceil() as usize;
        let mut worst = NegativeExcursion { min_pdf: 0.0, at_x: f64::NAN, negative_mass: 0.0 };
        for i in 0..=steps {
            let z = lo + (hi - lo) * i as f64 / steps as f64;
            let x = (self.params.mu() + self.params.sigma() * z).exp();
            let v = self.z_density(z) / (self.params.sigma() * x);
            if v < worst.min_pdf {
                worst.min_pdf = v;
                worst.at_x = x;
            }
        }
        worst.negative_mass = self.clipped().negative_mass();
        worst
    }

    /// Clamp-to-zero with renormalization.
    pub fn clipped(&self) -> ClippedModel {
        ClippedModel::new(self.clone())
    }

    /// Writes `i, xinu, mu, sigma` rows preceded by `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "# sigma2={}", self.params.sigma2())?;
        writeln!(w, "i,xinu,mu,sigma")?;
        for (i, v) in self.xinu.iter().enumerate() {
            writeln!(w, "{i},{v:e},{},{}", self.params.mu(), self.params.sigma())?;
        }
        Ok(())
    }

    /// Reads what [`write_csv`](Self::write_csv) wrote. `sigma^2` comes from
    /// the `# sigma2=` comment when present, otherwise from squaring `sigma`.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut sigma2 = None;
        let mut mu = None;
        let mut sigma = None;
        let mut xinu = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let bad = |msg: String| Error::Parse { line: lineno + 1, msg };
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("sigma2=") {
                    sigma2 = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?);
                }
                continue;
            }
            if line.is_empty() || line.starts_with("i,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", f.len())));
            }
            let i: usize = f[0].trim().parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
            if i != xinu.len() {
                return Err(bad(format!("row index {i} out of order")));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            xinu.push(num(f[1])?);
            mu = Some(num(f[2])?);
            sigma = Some(num(f[3])?);
        }
        let (mu, sigma) = match (mu, sigma) {
            (Some(m), Some(s)) => (m, s),
            _ => return Err(Error::Parse { line: 0, msg: "no coefficient rows".into() }),
        };
        let params = LognormalParams::new(mu, sigma2.unwrap_or(sigma * sigma))?;
        Self::from_xinu(params, xinu)
    }
}

pub fn approx_pdf(model: &ApproximantModel, x: f64) -> Result<f64> {
    model.pdf(x)
}

pub fn approx_cdf(model: &ApproximantModel, x: f64) -> Result<f64> {
    model.cdf(x)
}

pub fn approx_ccdf(model: &ApproximantModel, x: f64) -> Result<f64> {
    model.ccdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeExcursion {
    /// Most negative density value on the scan grid (0 if none).
    pub min_pdf: f64,
    /// Where it occurs; NaN when the density never goes negative.
    pub at_x: f64,
    /// `int max(-pdf, 0)`.
    pub negative_mass: f64,
}

/// The density `max(f, 0) / Z`, integrated by composite Gauss–Legendre in
/// the normalized log variable.
#[derive(Debug, Clone)]
pub struct ClippedModel {
    model: ApproximantModel,
    lo: f64,
    width: f64,
    /// Cumulative negative mass at panel boundaries.
    neg_cum: Vec<f64>,
    norm: f64,
    rule: GaussLegendre,
}

impl ClippedModel {
    const PANEL: f64 = 0.25;

    fn new(model: ApproximantModel) -> Self {
        let (lo, hi) = model.z_window();
        let panels = ((hi - lo) / Self::PANEL).ceil() as usize;
        let rule = GaussLegendre::new(10).expect("fixed rule");
        let mut neg_cum = Vec::with_capacity(panels + 1);
        neg_cum.push(0.0);
        let mut acc = 0.0;
        for k in 0..panels {
            let a = lo + k as f64 * Self::PANEL;
            acc += negative_part(&model, &rule, a, a + Self::PANEL);
            neg_cum.push(acc);
        }
        let norm = model.xinu_sum() + acc;
        Self { model, lo, width: Self::PANEL, neg_cum, norm, rule }
    }

    fn neg_mass_below(&self, z: f64) -> f64 {
        if z <= self.lo {
            return 0.0;
        }
        let k = ((z - self.lo) / self.width).floor() as usize;
        if k >= self.neg_cum.len() - 1 {
            return *self.neg_cum.last().expect("non-empty");
        }
        let a = self.lo + k as f64 * self.width;
        self.neg_cum[k] + negative_part(&self.model, &self.rule, a, z)
    }

    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn negative_mass(&self) -> f64 {
        *self.neg_cum.last().expect("non-empty")
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.model.pdf(x)?.max(0.0) / self.norm)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let z = self.model.z(x, "clipped_cdf")?;
        Ok((self.model.cdf(x)? + self.neg_mass_below(z)) / self.norm)
    }

    pub fn ccdf(&self, x: f64) -> Result<f64> {
        let z = self.model.z(x, "clipped_ccdf")?;
        let upper = self.model.ccdf(x)? - (1.0 - self.model.xinu_sum()) + self.negative_mass() - self.neg_mass_below(z);
        Ok(upper / self.norm)
    }
}

/// `int_a^b max(-g, 0) dz`, splitting the interval at sign changes of `g`
/// so the rule never straddles a kink.
fn negative_part(model: &ApproximantModel, rule: &GaussLegendre, a: f64, b: f64) -> f64 {
    const PROBES: usize = 8;
    let g = |z: f64| model.z_density(z);
    let mut cuts = vec![a];
    let mut prev = g(a);
    let mut z_prev = a;
    for i in 1..=PROBES {
        let z = a + (b - a) * i as f64 / PROBES as f64;
        let cur = g(z);
        if (prev < 0.0) != (cur < 0.0) {
            let (mut lo, mut hi) = (z_prev, z);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (g(mid) < 0.0) == (prev < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev = cur;
        z_prev = z;
    }
    cuts.push(b);
    cuts.windows(2).filter(|w| g(0.5 * (w[0] + w[1])) < 0.0).map(|w| -rule.integrate(w[0], w[1], 1, g)).sum()
}

/// One row of [`stability_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub n: usize,
    /// `|xi_N nu_N|` of the degree-`N` model.
    pub last_xinu: f64,
    /// `sup |F_N - F_{N-1}|` over the scan grid.
    pub sup_change: f64,
}

/// Fits every degree `1..=n_max` and reports how the CDF settles.
pub fn stability_scan(
    moments: &MomentSequence,
    p: &LognormalParams,
    n_max: usize,
    prec: u32,
) -> Result<Vec<StabilityRow>> {
    if n_max > moments.degree() {
        return Err(Error::domain(
            "stability_scan",
            format!("n_max {n_max} exceeds moment degree {}", moments.degree()),
        ));
    }
    // eta_i does not depend on the truncation degree
    let eta = fit_eta(&moments.truncate(n_max)?, p, prec)?;
    let models =
        (0..=n_max).map(|n| ApproximantModel::from_eta(eta[..=n].to_vec(), p, prec)).collect::<Result<Vec<_>>>()?;
    let lo = -10.0;
    let hi = 10.0 + n_max as f64 * p.sigma();
    let xs: Vec<f64> = (0..=2000).map(|i| (p.mu() + p.sigma() * (lo + (hi - lo) * i as f64 / 2000.0)).exp()).collect();
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut sup = 0.0f64;
        for &x in &xs {
            sup = sup.max((models[n].cdf(x)? - models[n - 1].cdf(x)?).abs());
        }
        rows.push(StabilityRow { n, last_xinu: models[n].xinu[n].abs(), sup_change: sup });
    }
    Ok(rows)
}

/// Relative moment-matching error `int x^k f_hat / M(k) - 1` for
/// `k = 0..=N`, by quadrature in the normalized log variable.
///
/// Uses the unrounded `xi_i nu_i` when the model has them: the `f64`
/// rounding is harmless for the CDF but high moments weight the far tail
/// by `q^{ik}` and amplify it.
pub fn moment_residuals(model: &ApproximantModel, moments: &MomentSequence, prec: u32) -> Result<Vec<f64>> {
    let p = model.params;
    let (lo, _) = model.z_window();
    let rule = GaussLegendreMp::new(20, prec)?;
    (0..=model.degree().min(moments.degree()))
        .map(|k| {
            // x^k f(x) dx = e^{k(mu + sigma z)} g(z) dz
            let hi = 12.0 + (model.degree() + k) as f64 * p.sigma();
            let sigma = Float::with_val(prec, p.sigma2()).sqrt();
            let v = rule.integrate(lo, hi, ((hi - lo) * 2.0).ceil() as usize, |z| {
                let lx = (Float::with_val(prec, &sigma * z) + p.mu()) * k as u32;
                Ok(lx.exp() * model.z_density_mp(z, prec))
            })?;
            let m = moments.values[k].to_float(prec);
            Ok((Float::with_val(prec, v / m) - 1u32).to_f64())
        })
        .collect()
}
