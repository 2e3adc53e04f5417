//! Composite Gauss–Legendre rules on finite intervals.
//!
//! [`GaussLegendre`] has `f64` nodes but can accumulate MPFR integrand
//! values; [`GaussLegendreMp`] carries its nodes at full working precision.

use std::f64::consts::PI;

use rug::Float;

use super::CompensatedSum;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[-1, 1]`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("gauss_legendre", "need at least one node"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]` split into `panels` equal pieces.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        let mut comp = 0.0;
        for p in 0..panels {
            let mid = a + h * (p as f64 + 0.5);
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + 0.5 * h * x);
            }
            // Neumaier step across panels
            let s = 0.5 * h * s;
            let t = total + s;
            comp += if total.abs() >= s.abs() { (total - t) + s } else { (s - t) + total };
            total = t;
        }
        total + comp
    }

    /// As [`integrate`](Self::integrate) but accumulates MPFR values at `prec`.
    pub fn integrate_mp<F>(&self, a: f64, b: f64, panels: usize, prec: u32, mut f: F) -> Result<Float>
    where
        F: FnMut(f64) -> Result<Float>,
    {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut acc = CompensatedSum::new(prec);
        for p in 0..panels {
            let mid = a + h * (p as f64 + 0.5);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                let v = f(mid + 0.5 * h * x)?;
                acc.add(&Float::with_val(prec, &v * (0.5 * h * w)));
            }
        }
        Ok(acc.value())
    }
}

/// A Gauss–Legendre rule whose nodes and weights carry `prec` bits, for
/// integrands whose parts cancel so strongly that `f64` node placement
/// would show through.
#[derive(Debug, Clone)]
pub struct GaussLegendreMp {
    nodes: Vec<Float>,
    weights: Vec<Float>,
}

impl GaussLegendreMp {
    pub fn new(n: usize, prec: u32) -> Result<Self> {
        let seed = GaussLegendre::new(n)?;
        let wp = prec + 32;
        let tiny = Float::with_val(wp, 1) >> (prec + 16);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &x0 in &seed.nodes {
            let mut x = Float::with_val(wp, x0);
            for _ in 0..20 {
                let (p, d) = legendre_mp(n, &x);
                let dx = Float::with_val(wp, &p / &d);
                x -= &dx;
                if dx.abs() < tiny {
                    break;
                }
            }
            let (_, d) = legendre_mp(n, &x);
            let one_minus = Float::with_val(wp, 1) - Float::with_val(wp, x.square_ref());
            let w = Float::with_val(wp, 2) / (one_minus * Float::with_val(wp, d.square_ref()));
            nodes.push(Float::with_val(prec, &x));
            weights.push(Float::with_val(prec, &w));
        }
        Ok(Self { nodes, weights })
    }

    /// Integrates `f` over `[a, b]` in `panels` equal pieces; abscissae are
    /// formed in MPFR.
    pub fn integrate<F>(&self, a: f64, b: f64, panels: usize, mut f: F) -> Result<Float>
    where
        F: FnMut(&Float) -> Result<Float>,
    {
        let prec = self.nodes[0].prec();
        let panels = panels.max(1);
        let h = Float::with_val(prec, Float::with_val(prec, b) - a) / panels as u32;
        let half = Float::with_val(prec, &h / 2u32);
        let mut acc = CompensatedSum::new(prec);
        for p in 0..panels {
            let mid = Float::with_val(prec, &h * (2 * p + 1) as u32) / 2u32 + a;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                let t = Float::with_val(prec, &half * x) + &mid;
                let v = f(&t)?;
                acc.add(&(v * w * &half));
            }
        }
        Ok(acc.value())
    }
}

fn legendre_mp(n: usize, x: &Float) -> (Float, Float) {
    let prec = x.prec();
    let mut p0 = Float::with_val(prec, 1);
    let mut p1 = x.clone();
    for j in 2..=n as u32 {
        let mut p2 = Float::with_val(prec, x * &p1) * (2 * j - 1);
        p2 -= Float::with_val(prec, &p0 * (j - 1));
        p2 /= j;
        p0 = p1;
        p1 = p2;
    }
    let num = Float::with_val(prec, x * &p1) - &p0;
    let den = Float::with_val(prec, x.square_ref()) - 1u32;
    let d = num * n as u32 / den;
    (p1, d)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
