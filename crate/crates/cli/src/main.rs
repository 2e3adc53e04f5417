mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Settings};

/// Lognormal-series approximations to products of Nakagami-m variables.
#[derive(Parser, Debug)]
#[command(name = "lnprod", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Orthogonal-polynomial coefficients for a lognormal weight.
    Poly(Opts),
    /// Model CCDF against a simulated one on a grid.
    Ccdf(Opts),
    /// MSE grid over (m, rho) rows and K columns.
    MseTable(Opts),
    /// Writes the fitted model (mu, sigma, xi_i nu_i).
    ModelExport(Opts),
    /// Product moments and the fitted (mu, sigma^2).
    Moments(Opts),
}

#[derive(Args, Debug)]
struct Opts {
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of factors (comma list for mse-table).
    #[arg(long = "K")]
    k: Option<String>,
    /// Fading parameter (comma list for mse-table).
    #[arg(long)]
    m: Option<String>,
    /// Mean power, scalar or one per factor.
    #[arg(long)]
    omega: Option<String>,
    /// Equal power correlation (comma list for mse-table).
    #[arg(long, conflicts_with = "lambda")]
    rho: Option<String>,
    /// Correlation parameters, scalar or one per factor.
    #[arg(long)]
    lambda: Option<String>,
    /// Approximation degree N (highest n for poly).
    #[arg(long)]
    degree: Option<String>,
    /// Monte-Carlo sample count.
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Working precision in bits.
    #[arg(long)]
    bits: Option<String>,
    /// Starting Gauss-Laguerre node count.
    #[arg(long)]
    nodes: Option<String>,
    /// Log-spaced grid min:max:count.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Add determinant-oracle columns (poly).
    #[arg(long)]
    oracle: bool,
    /// Clamp negative density to zero and renormalize.
    #[arg(long)]
    clip_negative_pdf: bool,
    /// Lognormal mu (poly).
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// Lognormal sigma^2 (poly).
    #[arg(long)]
    sigma2: Option<String>,
}

impl Opts {
    fn settings(&self) -> anyhow::Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        let pairs: [(&'static str, &Option<String>); 14] = [
            ("K", &self.k),
            ("m", &self.m),
            ("omega", &self.omega),
            ("rho", &self.rho),
            ("lambda", &self.lambda),
            ("degree", &self.degree),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("bits", &self.bits),
            ("nodes", &self.nodes),
            ("grid", &self.grid),
            ("out", &self.out),
            ("mu", &self.mu),
            ("sigma2", &self.sigma2),
        ];
        for (key, v) in pairs {
            if let Some(v) = v {
                s.set_flag(key, v.clone());
            }
        }
        // a flag overrides whichever correlation form the file used
        if self.rho.is_some() && self.lambda.is_none() && s.has("lambda") {
            s.remove("lambda");
        }
        if self.lambda.is_some() && self.rho.is_none() && s.has("rho") {
            s.remove("rho");
        }
        if self.oracle {
            s.set_flag("oracle", "true");
        }
        if self.clip_negative_pdf {
            s.set_flag("clip-negative-pdf", "true");
        }
        Ok(s)
    }
}

fn run(cli: Cli) -> anyhow::Result<commands::Status> {
    let (name, opts) = match &cli.command {
        Command::Poly(o) => ("poly", o),
        Command::Ccdf(o) => ("ccdf", o),
        Command::MseTable(o) => ("mse-table", o),
        Command::ModelExport(o) => ("model-export", o),
        Command::Moments(o) => ("moments", o),
    };
    let cfg = RunConfig::resolve(name, &opts.settings()?)?;
    commands::dispatch(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::ThresholdMissed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
