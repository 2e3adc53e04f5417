//! Monte-Carlo reference: correlated Nakagami-m samples, empirical CDFs and
//! the accuracy metrics used to judge an approximant.
//!
//! Factor `i` of one realization is
//! `R_i^2 = Omega_i/(2m) * sum_l (lambda_i U_l + sqrt(1 - lambda_i^2) V_il)^2`
//! with `U_l` shared by every factor and `V_il` private, which gives
//! Nakagami-m marginals and power correlation `lambda_i^2 lambda_j^2`.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::approx::{ApproximantModel, ClippedModel};
use crate::error::{Error, Result};
use crate::nakagami::NakagamiProductSpec;

/// Samples per RNG substream. Fixed so a batch does not depend on the
/// number of worker threads.
pub const CHUNK: usize = 65_536;

/// Sorted product realizations together with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    values: Vec<f64>,
    seed: u64,
    spec_hash: u64,
}

impl SampleBatch {
    /// Wraps externally produced values; they are sorted here.
    pub fn from_values(mut values: Vec<f64>, seed: u64, spec_hash: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("SampleBatch", "empty batch"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::domain("SampleBatch", format!("samples must be positive and finite, got {v}")));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values, seed, spec_hash })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `# spec-hash seed n` followed by one value per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {:016x} {} {}", self.spec_hash, self.seed, self.n())?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })??;
        let fields: Vec<&str> = head.trim_start_matches('#').split_whitespace().collect();
        let bad_header = || Error::Parse { line: 1, msg: format!("expected '# spec-hash seed n', got '{head}'") };
        if !head.starts_with('#') || fields.len() != 3 {
            return Err(bad_header());
        }
        let spec_hash = u64::from_str_radix(fields[0], 16).map_err(|_| bad_header())?;
        let seed = fields[1].parse().map_err(|_| bad_header())?;
        let n: usize = fields[2].parse().map_err(|_| bad_header())?;
        let mut values = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v = line.trim().parse().map_err(|e| Error::Parse { line: i + 2, msg: format!("{e}") })?;
            values.push(v);
        }
        if values.len() != n {
            return Err(Error::Parse { line: 1, msg: format!("header declares {n} values, found {}", values.len()) });
        }
        Self::from_values(values, seed, spec_hash)
    }
}

/// Provenance hash of a spec: the first 8 bytes of SHA-256 over its
/// canonical debug form (which prints every `f64` exactly).
pub fn spec_hash(spec: &NakagamiProductSpec) -> u64 {
    let digest = Sha256::digest(format!("{spec:?}").as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn gaussian_count(spec: &NakagamiProductSpec) -> Result<Vec<usize>> {
    (0..spec.k())
        .map(|i| {
            let two_m = 2.0 * spec.m_of(i);
            if two_m.fract() != 0.0 || two_m < 1.0 {
                return Err(Error::Unsupported(format!(
                    "sampler needs 2m to be a positive integer, got m = {}",
                    spec.m_of(i)
                )));
            }
            Ok(two_m as usize)
        })
        .collect()
}

/// Runs `emit` on the `K` squared amplitudes of each realization, chunk by
/// chunk, and concatenates the per-chunk outputs in chunk order.
fn for_each_realization<T, F>(spec: &NakagamiProductSpec, n: usize, seed: u64, emit: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64], &mut Vec<T>) + Sync,
{
    if n == 0 {
        return Err(Error::domain("sample_correlated", "need at least one sample"));
    }
    let counts = gaussian_count(spec)?;
    let shared = counts.iter().copied().max().unwrap_or(0);
    let k = spec.k();
    let lam: Vec<f64> = spec.lambda().to_vec();
    let comp: Vec<f64> = lam.iter().map(|l| (1.0 - l * l).sqrt()).collect();
    let scale: Vec<f64> = (0..k).map(|i| spec.omega()[i] / counts[i] as f64).collect();
    let correlated = !spec.is_independent();
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let mut out = Vec::with_capacity(len);
            let mut u = vec![0.0; shared];
            let mut r2 = vec![0.0; k];
            for _ in 0..len {
                if correlated {
                    u.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
                }
                for i in 0..k {
                    let mut s = 0.0;
                    for ul in &u[..counts[i]] {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        let g = lam[i] * ul + comp[i] * v;
                        s += g * g;
                    }
                    r2[i] = scale[i] * s;
                }
                emit(&r2, &mut out);
            }
            out
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

/// `n` realizations of `P = prod_i R_i`, sorted. The batch depends only on
/// `(spec, n, seed)`.
pub fn sample_correlated(spec: &NakagamiProductSpec, n: usize, seed: u64) -> Result<SampleBatch> {
    let values = for_each_realization(spec, n, seed, |r2, out| {
        out.push(r2.iter().product::<f64>().sqrt());
    })?;
    SampleBatch::from_values(values, seed, spec_hash(spec))
}

/// The squared amplitudes `R_i^2` behind [`sample_correlated`], unsorted and
/// row-major (`K` values per realization).
pub fn sample_factor_powers(spec: &NakagamiProductSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    for_each_realization(spec, n, seed, |r2, out| out.extend_from_slice(r2))
}

/// `count(P_j <= x) / n`.
pub fn empirical_cdf(batch: &SampleBatch, x: f64) -> f64 {
    batch.values.partition_point(|v| *v <= x) as f64 / batch.n() as f64
}

/// `count(P_j > x) / n`.
pub fn empirical_ccdf(batch: &SampleBatch, x: f64) -> f64 {
    let n = batch.n();
    (n - batch.values.partition_point(|v| *v <= x)) as f64 / n as f64
}

/// A distribution function that can be compared against a batch.
pub trait CdfModel: Sync {
    fn cdf(&self, x: f64) -> Result<f64>;
    fn ccdf(&self, x: f64) -> Result<f64>;
}

impl CdfModel for ApproximantModel {
    fn cdf(&self, x: f64) -> Result<f64> {
        ApproximantModel::cdf(self, x)
    }
    fn ccdf(&self, x: f64) -> Result<f64> {
        ApproximantModel::ccdf(self, x)
    }
}

impl CdfModel for ClippedModel {
    fn cdf(&self, x: f64) -> Result<f64> {
        ClippedModel::cdf(self, x)
    }
    fn ccdf(&self, x: f64) -> Result<f64> {
        ClippedModel::ccdf(self, x)
    }
}

/// `(1/n) sum_j (F*(P_j) - F(P_j))^2`, the squared CDF error averaged over
/// the empirical measure.
pub fn mse_epsilon2<M: CdfModel + ?Sized>(batch: &SampleBatch, model: &M) -> Result<f64> {
    mse_epsilon2_with(batch, |x| model.cdf(x))
}

/// [`mse_epsilon2`] for an arbitrary CDF.
pub fn mse_epsilon2_with<F>(batch: &SampleBatch, cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let v = &batch.values;
    let n = v.len();
    let sum: f64 = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = 0.0;
            let mut j = c * CHUNK;
            let end = (j + CHUNK).min(n);
            while j < end {
                // all tied values share the right-continuous F*
                let hi = j + v[j..].partition_point(|w| *w <= v[j]);
                let fe = hi as f64 / n as f64;
                let d = fe - cdf(v[j])?;
                s += d * d * (hi.min(end) - j) as f64;
                j = hi.min(end);
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    Ok(sum / n as f64)
}

/// One grid point of a CCDF comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdfRow {
    pub x: f64,
    pub model: f64,
    pub empirical: f64,
    pub gap: f64,
}

/// Largest gap among grid points whose empirical CCDF lies in
/// `[10^decade, 10^(decade+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecadeRow {
    pub decade: i32,
    pub points: usize,
    pub max_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub mse: f64,
    pub max_ccdf_gap: f64,
    pub rows: Vec<CcdfRow>,
    pub per_decade: Vec<DecadeRow>,
}

/// Model against empirical CCDF on `grid`, plus the MSE over the batch.
pub fn ccdf_compare<M: CdfModel + ?Sized>(batch: &SampleBatch, model: &M, grid: &[f64]) -> Result<AccuracyReport> {
    let (lo, hi) = (batch.min(), batch.max());
    if let Some(x) = grid.iter().find(|x| !(**x >= lo && **x <= hi)) {
        return Err(Error::domain("ccdf_compare", format!("grid point {x} outside sample support [{lo}, {hi}]")));
    }
    let rows = grid
        .iter()
        .map(|&x| {
            let model = model.ccdf(x)?;
            let empirical = empirical_ccdf(batch, x);
            Ok(CcdfRow { x, model, empirical, gap: (model - empirical).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ccdf_gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
    let mut per_decade: Vec<DecadeRow> = Vec::new();
    for r in rows.iter().filter(|r| r.empirical > 0.0) {
        let decade = r.empirical.log10().floor() as i32;
        match per_decade.iter_mut().find(|d| d.decade == decade) {
            Some(d) => {
                d.points += 1;
                d.max_gap = d.max_gap.max(r.gap);
            }
            None => per_decade.push(DecadeRow { decade, points: 1, max_gap: r.gap }),
        }
    }
    per_decade.sort_by_key(|d| std::cmp::Reverse(d.decade));
    Ok(AccuracyReport { mse: mse_epsilon2(batch, model)?, max_ccdf_gap, rows, per_decade })
}

/// `count` log-spaced points from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && min.is_finite() && max.is_finite()) || count == 0 {
        return Err(Error::domain("log_grid", format!("need 0 < min <= max and count >= 1, got {min}:{max}:{count}")));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.ln(), max.ln());
    let mut g: Vec<f64> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
    g[0] = min;
    g[count - 1] = max;
    Ok(g)
}

/// Log-spaced grid spanning the samples whose empirical CCDF lies in
/// `[ccdf_lo, 1]`.
pub fn ccdf_range_grid(batch: &SampleBatch, ccdf_lo: f64, count: usize) -> Result<Vec<f64>> {
    if !(ccdf_lo > 0.0 && ccdf_lo < 1.0) {
        return Err(Error::domain("ccdf_range_grid", format!("ccdf_lo must lie in (0, 1), got {ccdf_lo}")));
    }
    let n = batch.n();
    // largest sample with at least ccdf_lo * n samples above it
    let above = (ccdf_lo * n as f64).ceil() as usize;
    let idx = n.saturating_sub(above + 1);
    log_grid(batch.min(), batch.values[idx].max(batch.min()), count)
}

/// Mean and variance of a sample with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

pub fn sample_stats(xs: &[f64]) -> SampleStats {
    let n = xs.len();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    let var = m2 / (nf - 1.0);
    let m4 = m4 / nf;
    let pop = m2 / nf;
    SampleStats { n, mean, var, se_mean: (var / nf).sqrt(), se_var: ((m4 - pop * pop) / nf).max(0.0).sqrt() }
}

/// Pearson correlation.
pub fn sample_correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}
