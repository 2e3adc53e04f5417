//! Run configuration: `key=value` files merged with command-line flags.
//!
//! File grammar: one `key=value` per line, `#` starts a comment, blank
//! lines are ignored. Keys are the long flag names (`K`, `m`, `omega`,
//! `rho`, `lambda`, `degree`, `samples`, `seed`, `bits`, `nodes`, `grid`,
//! `out`, `oracle`, `clip-negative-pdf`, `mu`, `sigma2`). Lists are comma
//! separated. Flags override file values.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use lnprod::{NakagamiProductSpec, PrecisionConfig};

pub const KEYS: &[&str] = &[
    "K",
    "m",
    "omega",
    "rho",
    "lambda",
    "degree",
    "samples",
    "seed",
    "bits",
    "nodes",
    "grid",
    "out",
    "oracle",
    "clip-negative-pdf",
    "mu",
    "sigma2",
];

/// Raw values with where each came from, for diagnostics.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<&'static str, (String, String)>,
}

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| *k == key)
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut s = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("{name} line {}", i + 1);
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("{origin}: expected key=value, got '{line}'"))?;
            let key = canonical(k.trim()).ok_or_else(|| anyhow!("{origin}: unknown key '{}'", k.trim()))?;
            s.values.insert(key, (v.trim().to_string(), origin));
        }
        Ok(s)
    }

    pub fn set_flag(&mut self, key: &'static str, value: impl Into<String>) {
        self.values.insert(key, (value.into(), format!("--{key}")));
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((v, origin)) => {
                v.parse().map(Some).map_err(|e| anyhow!("{origin}: invalid value '{v}' for {key}: {e}"))
            }
        }
    }

    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .split(',')
                .map(|x| x.trim().parse().map_err(|e| anyhow!("{origin}: invalid entry '{}' in {key}: {e}", x.trim())))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}

/// Log-spaced evaluation grid `min:max:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("expected min:max:count".into());
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"));
        let (min, max) = (num(parts[0])?, num(parts[1])?);
        let count = parts[2].trim().parse().map_err(|e| format!("'{}': {e}", parts[2]))?;
        if min.is_nan() || max.is_nan() || min <= 0.0 || max < min || count == 0 {
            return Err("need 0 < min <= max and count >= 1".into());
        }
        Ok(Grid { min, max, count })
    }
}

impl Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Correlation {
    Rho(Vec<f64>),
    Lambda(Vec<f64>),
}

/// Everything a command needs, fully resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: &'static str,
    pub k: Vec<usize>,
    pub m: Vec<f64>,
    pub omega: Vec<f64>,
    pub correlation: Option<Correlation>,
    pub degree: usize,
    pub samples: usize,
    pub seed: u64,
    pub precision: PrecisionConfig,
    pub out: Option<PathBuf>,
    pub grid: Option<Grid>,
    pub oracle: bool,
    pub clip_negative_pdf: bool,
    pub mu: f64,
    pub sigma2: Option<f64>,
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn resolve(command: &'static str, s: &Settings) -> Result<Self> {
        let rho = s.list::<f64>("rho")?;
        let lambda = s.list::<f64>("lambda")?;
        let correlation = match (rho, lambda) {
            (Some(_), Some(_)) => bail!("give either rho or lambda, not both"),
            (Some(r), None) => Some(Correlation::Rho(r)),
            (None, Some(l)) => Some(Correlation::Lambda(l)),
            (None, None) => None,
        };
        let bits = s.get("bits")?.unwrap_or(PrecisionConfig::DEFAULT_BITS);
        let nodes = s.get("nodes")?.unwrap_or(PrecisionConfig::DEFAULT_NODES);
        let cfg = RunConfig {
            command,
            k: s.list("K")?.unwrap_or_default(),
            m: s.list("m")?.unwrap_or_default(),
            omega: s.list("omega")?.unwrap_or_else(|| vec![1.0]),
            correlation,
            degree: s.get("degree")?.unwrap_or(16),
            samples: s.get::<f64>("samples")?.map(|v| v as usize).unwrap_or(1_000_000),
            seed: s.get("seed")?.unwrap_or(1),
            precision: PrecisionConfig::new(bits, nodes)?,
            out: s.get::<String>("out")?.map(PathBuf::from),
            grid: s.get("grid")?,
            oracle: s.flag("oracle")?,
            clip_negative_pdf: s.flag("clip-negative-pdf")?,
            mu: s.get("mu")?.unwrap_or(0.0),
            sigma2: s.get("sigma2")?,
        };
        if cfg.samples == 0 {
            bail!("samples must be at least 1");
        }
        Ok(cfg)
    }

    /// The resolved configuration as `key=value` comment lines.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec![format!("lnprod {}", env!("CARGO_PKG_VERSION")), format!("command={}", self.command)];
        if self.command == "poly" {
            h.push(format!("mu={}", self.mu));
            h.push(format!("sigma2={}", self.sigma2.map_or("unset".to_string(), |v| v.to_string())));
            h.push(format!("degree={}", self.degree));
            h.push(format!("bits={}", self.precision.working_bits()));
            h.push(format!("oracle={}", self.oracle));
            return h;
        }
        h.push(format!("K={}", join(&self.k)));
        h.push(format!("m={}", join(&self.m)));
        h.push(format!("omega={}", join(&self.omega)));
        match &self.correlation {
            Some(Correlation::Rho(r)) => h.push(format!("rho={}", join(r))),
            Some(Correlation::Lambda(l)) => h.push(format!("lambda={}", join(l))),
            None => {}
        }
        h.push(format!("degree={}", self.degree));
        if matches!(self.command, "ccdf" | "mse-table") {
            h.push(format!("samples={}", self.samples));
            h.push(format!("seed={}", self.seed));
            h.push(format!("clip-negative-pdf={}", self.clip_negative_pdf));
        }
        if let Some(g) = self.grid {
            h.push(format!("grid={g}"));
        }
        h.push(format!("bits={}", self.precision.working_bits()));
        h.push(format!("nodes={}", self.precision.quadrature_nodes()));
        h
    }

    fn single<T: Copy + Display>(v: &[T], key: &str) -> Result<Option<T>> {
        match v {
            [] => Ok(None),
            [x] => Ok(Some(*x)),
            _ => bail!("{key} takes a single value for this command, got {}", join(v)),
        }
    }

    /// The one product spec that single-spec commands work on.
    pub fn spec(&self) -> Result<NakagamiProductSpec> {
        let m = Self::single(&self.m, "m")?.ok_or_else(|| anyhow!("m is required"))?;
        let k_flag = Self::single(&self.k, "K")?;
        let k = match (k_flag, self.omega.len()) {
            (Some(k), 1) => k,
            (Some(k), n) if k == n => k,
            (Some(k), n) => bail!("K={k} but {n} omega values given"),
            (None, 1) => bail!("K is required"),
            (None, n) => n,
        };
        let omega = if self.omega.len() == 1 { vec![self.omega[0]; k] } else { self.omega.clone() };
        let lambda = match &self.correlation {
            None => bail!("exactly one of rho or lambda is required"),
            Some(Correlation::Rho(r)) => {
                let rho = Self::single(r, "rho")?.expect("list is non-empty");
                if !(0.0..1.0).contains(&rho) {
                    bail!("rho must lie in [0, 1), got {rho}");
                }
                vec![rho.powf(0.25); k]
            }
            Some(Correlation::Lambda(l)) if l.len() == 1 => vec![l[0]; k],
            Some(Correlation::Lambda(l)) if l.len() == k => l.clone(),
            Some(Correlation::Lambda(l)) => bail!("{} lambda values for K={k}", l.len()),
        };
        Ok(NakagamiProductSpec::new(m, omega, lambda)?)
    }
}
