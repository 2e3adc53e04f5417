use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{anyhow, bail, Context, Result};
use lnprod::approx::ApproximantModel;
use lnprod::lognormal::{ortho_coeff_closed, ortho_coeff_oracle, LognormalParams, ORACLE_MAX_DEGREE};
use lnprod::montecarlo::{ccdf_compare, ccdf_range_grid, log_grid, mse_epsilon2, sample_correlated, CdfModel};
use lnprod::nakagami::{fit_product, NakagamiProductSpec};

use crate::config::{Correlation, RunConfig};

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// `ccdf` measured a gap above the threshold for its (m, rho) regime.
    ThresholdMissed,
}

const DEFAULT_K: [usize; 10] = [2, 4, 6, 8, 10, 12, 14, 16, 18, 20];
const DEFAULT_M: [f64; 2] = [1.0, 4.0];
const DEFAULT_RHO: [f64; 4] = [0.0, 0.1, 0.5, 0.8];

pub fn dispatch(cfg: &RunConfig) -> Result<Status> {
    match cfg.command {
        "poly" => poly(cfg),
        "ccdf" => ccdf(cfg),
        "mse-table" => mse_table(cfg),
        "model-export" => model_export(cfg),
        "moments" => moments(cfg),
        other => bail!("unknown command {other}"),
    }
}

fn open_out(cfg: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_header(w: &mut dyn Write, cfg: &RunConfig) -> Result<()> {
    for line in cfg.header() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

fn poly(cfg: &RunConfig) -> Result<Status> {
    let sigma2 = cfg.sigma2.ok_or_else(|| anyhow!("poly needs --sigma2"))?;
    let p = LognormalParams::new(cfg.mu, sigma2)?;
    let prec = cfg.precision.working_bits();
    if cfg.oracle && cfg.degree > ORACLE_MAX_DEGREE {
        bail!("--oracle supports degree <= {ORACLE_MAX_DEGREE}, got {}", cfg.degree);
    }
    let mut w = open_out(cfg)?;
    write_header(&mut *w, cfg)?;
    if cfg.oracle {
        writeln!(w, "n,k,sign,log_mag,oracle_sign,oracle_log_mag,rel_dev")?;
    } else {
        writeln!(w, "n,k,sign,log_mag")?;
    }
    let mut worst = 0.0f64;
    for n in 0..=cfg.degree {
        for k in 0..=n {
            let c = ortho_coeff_closed(n, k, &p, prec)?;
            write!(w, "{n},{k},{},{}", c.sign().as_i8(), c.log_mag().to_f64())?;
            if cfg.oracle {
                let o = ortho_coeff_oracle(n, k, &p, prec)?;
                let d = c.rel_diff(&o);
                worst = worst.max(d);
                write!(w, ",{},{},{d:e}", o.sign().as_i8(), o.log_mag().to_f64())?;
            }
            writeln!(w)?;
        }
    }
    if cfg.oracle {
        writeln!(w, "# max_rel_deviation={worst:e}")?;
    }
    w.flush()?;
    Ok(Status::Ok)
}

fn fitted_model(spec: &NakagamiProductSpec, cfg: &RunConfig, degree: usize) -> Result<ApproximantModel> {
    let fit = fit_product(spec, degree, &cfg.precision)?;
    Ok(ApproximantModel::fit(&fit.moments, &fit.params()?, cfg.precision.working_bits())?)
}

/// Largest pairwise power correlation of the spec.
fn max_rho(spec: &NakagamiProductSpec) -> f64 {
    let k = spec.k();
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).map(|(i, j)| spec.rho(i, j)).fold(0.0, f64::max)
}

/// Gap the approximation is expected to stay under for `(m, rho)`.
pub fn gap_threshold(m: Option<f64>, rho: f64) -> Option<f64> {
    match m {
        Some(m) if m == 4.0 && rho <= 0.1 => Some(1e-3),
        Some(m) if m == 4.0 && rho <= 0.5 => Some(1e-2),
        _ => None,
    }
}

fn ccdf(cfg: &RunConfig) -> Result<Status> {
    if cfg.degree == 0 {
        bail!("degree must be at least 1");
    }
    let spec = cfg.spec()?;
    let model = fitted_model(&spec, cfg, cfg.degree)?;
    let batch = sample_correlated(&spec, cfg.samples, cfg.seed)?;
    let (grid, dropped) = match cfg.grid {
        Some(g) => {
            let all = log_grid(g.min, g.max, g.count)?;
            let inside: Vec<f64> = all.iter().copied().filter(|x| *x >= batch.min() && *x <= batch.max()).collect();
            let dropped = all.len() - inside.len();
            (inside, dropped)
        }
        None => (ccdf_range_grid(&batch, 1e-4, 200)?, 0),
    };
    if grid.is_empty() {
        bail!("no grid point lies inside the sample support [{}, {}]", batch.min(), batch.max());
    }
    let clipped;
    let m: &dyn CdfModel = if cfg.clip_negative_pdf {
        clipped = model.clipped();
        &clipped
    } else {
        &model
    };
    let report = ccdf_compare(&batch, m, &grid)?;
    let mut w = open_out(cfg)?;
    write_header(&mut *w, cfg)?;
    if dropped > 0 {
        writeln!(w, "# dropped {dropped} grid points outside the sample support")?;
    }
    writeln!(w, "x,ccdf_model,ccdf_empirical,gap")?;
    for r in &report.rows {
        writeln!(w, "{:e},{:e},{:e},{:e}", r.x, r.model, r.empirical, r.gap)?;
    }
    writeln!(w, "# max_gap={:e}", report.max_ccdf_gap)?;
    writeln!(w, "# mse={:e}", report.mse)?;
    for d in &report.per_decade {
        writeln!(w, "# decade 1e{}: points={} max_gap={:e}", d.decade, d.points, d.max_gap)?;
    }
    let threshold = gap_threshold(spec.common_m(), max_rho(&spec));
    let status = match threshold {
        Some(t) if report.max_ccdf_gap >= t => {
            writeln!(w, "# threshold={t:e} verdict=missed")?;
            Status::ThresholdMissed
        }
        Some(t) => {
            writeln!(w, "# threshold={t:e} verdict=met")?;
            Status::Ok
        }
        None => {
            writeln!(w, "# threshold=none")?;
            Status::Ok
        }
    };
    w.flush()?;
    Ok(status)
}

fn mse_table(cfg: &RunConfig) -> Result<Status> {
    if cfg.degree == 0 {
        bail!("degree must be at least 1");
    }
    let mut cfg = cfg.clone();
    if cfg.k.is_empty() {
        cfg.k = DEFAULT_K.to_vec();
    }
    if cfg.m.is_empty() {
        cfg.m = DEFAULT_M.to_vec();
    }
    let rhos = match &cfg.correlation {
        None => DEFAULT_RHO.to_vec(),
        Some(Correlation::Rho(r)) => r.clone(),
        Some(Correlation::Lambda(_)) => bail!("mse-table takes rho values, not lambda"),
    };
    cfg.correlation = Some(Correlation::Rho(rhos.clone()));
    let omega = match cfg.omega[..] {
        [w] => w,
        _ => bail!("mse-table takes a single omega"),
    };
    let mut w = open_out(&cfg)?;
    write_header(&mut *w, &cfg)?;
    let cols: Vec<String> = cfg.k.iter().map(|k| format!("K={k}")).collect();
    writeln!(w, "m,rho,{}", cols.join(","))?;
    for &m in &cfg.m {
        for &rho in &rhos {
            let mut row = Vec::with_capacity(cfg.k.len());
            for &k in &cfg.k {
                let spec = NakagamiProductSpec::equicorrelated(k, m, omega, rho)?;
                let model = fitted_model(&spec, &cfg, cfg.degree)?;
                let batch = sample_correlated(&spec, cfg.samples, cfg.seed)?;
                let e = if cfg.clip_negative_pdf {
                    mse_epsilon2(&batch, &model.clipped())?
                } else {
                    mse_epsilon2(&batch, &model)?
                };
                row.push(format!("{e:e}"));
            }
            writeln!(w, "{m},{rho},{}", row.join(","))?;
        }
    }
    w.flush()?;
    Ok(Status::Ok)
}

fn model_export(cfg: &RunConfig) -> Result<Status> {
    let spec = cfg.spec()?;
    let model = fitted_model(&spec, cfg, cfg.degree)?;
    let mut comments = cfg.header();
    comments.push(format!("mu={}", model.params().mu()));
    comments.push(format!("sigma={}", model.params().sigma()));
    comments.push(format!("N={}", model.degree()));
    let mut w = open_out(cfg)?;
    model.write_csv(&mut w, &comments)?;
    w.flush()?;
    Ok(Status::Ok)
}

fn moments(cfg: &RunConfig) -> Result<Status> {
    let spec = cfg.spec()?;
    let fit = fit_product(&spec, cfg.degree, &cfg.precision)?;
    let mut w = open_out(cfg)?;
    write_header(&mut *w, cfg)?;
    writeln!(w, "# mu={}", fit.mu)?;
    writeln!(w, "# sigma2={}", fit.sigma2)?;
    writeln!(w, "k,log_moment,moment")?;
    for (k, v) in fit.moments.values().iter().enumerate() {
        writeln!(w, "{k},{},{:e}", v.log_mag().to_f64(), v.to_f64())?;
    }
    w.flush()?;
    Ok(Status::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_by_regime() {
        assert_eq!(gap_threshold(Some(4.0), 0.0), Some(1e-3));
        assert_eq!(gap_threshold(Some(4.0), 0.1), Some(1e-3));
        assert_eq!(gap_threshold(Some(4.0), 0.5), Some(1e-2));
        assert_eq!(gap_threshold(Some(4.0), 0.8), None);
        assert_eq!(gap_threshold(Some(1.0), 0.0), None);
    }
}
