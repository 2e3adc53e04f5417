//! Generalized Gauss–Laguerre quadrature for the weight `t^alpha e^{-t}`.
//!
//! Nodes are located in `f64` by Sturm-sequence bisection on the Jacobi
//! matrix, then polished by Newton's method on `L_n^(alpha)` in MPFR so the
//! rule is accurate to the working precision.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rug::Float;

use super::gamma::ln_gamma;
use crate::error::{Error, Result};

const GUARD_BITS: u32 = 32;

/// An `n`-point rule with `sum w_i g(t_i) = int_0^inf t^alpha e^{-t} g(t) dt`
/// for every polynomial `g` of degree `<= 2n - 1`.
#[derive(Debug, Clone)]
pub struct LaguerreRule {
    alpha: f64,
    nodes: Vec<Float>,
    weights: Vec<Float>,
}

impl LaguerreRule {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Float] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    pub fn pairs_f64(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().zip(&self.weights).map(|(t, w)| (t.to_f64(), w.to_f64())).collect()
    }

    /// Applies the rule to `g`.
    pub fn integrate<G>(&self, mut g: G) -> Result<Float>
    where
        G: FnMut(&Float) -> Result<Float>,
    {
        let prec = self.nodes.first().map_or(64, Float::prec);
        let mut acc = super::CompensatedSum::new(prec);
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            let v = g(t)?;
            acc.add(&Float::with_val(prec, w * &v));
        }
        Ok(acc.value())
    }
}

/// Eigenvalue count below `x` of the Laguerre Jacobi matrix.
fn sturm_count(diag: &[f64], off_sq: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if q == 0.0 { f64::EPSILON * (1.0 + x.abs()) } else { q };
        q = diag[i] - x - off_sq[i] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn initial_nodes(alpha: f64, n: usize) -> Vec<f64> {
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + 1.0 + alpha).collect();
    let off_sq: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { i as f64 * (i as f64 + alpha) }).collect();
    let upper = (0..n)
        .map(|i| {
            let left = off_sq[i].sqrt();
            let right = if i + 1 < n { off_sq[i + 1].sqrt() } else { 0.0 };
            diag[i] + left + right
        })
        .fold(0.0f64, f64::max);
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (0.0f64, upper);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if sturm_count(&diag, &off_sq, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// `(L_n(x), L_{n-1}(x))` by the three-term recurrence.
fn laguerre_pair(n: usize, alpha: &Float, x: &Float) -> (Float, Float) {
    let prec = x.prec();
    let mut prev = Float::with_val(prec, 1);
    let mut cur = Float::with_val(prec, 1 + Float::with_val(prec, alpha - x));
    if n == 1 {
        return (cur, prev);
    }
    for j in 1..n {
        let j = j as u32;
        // (j+1) L_{j+1} = (2j + 1 + alpha - x) L_j - (j + alpha) L_{j-1}
        let coef = Float::with_val(prec, alpha - x) + (2 * j + 1);
        let mut next = Float::with_val(prec, &coef * &cur);
        next -= Float::with_val(prec, alpha + j) * &prev;
        next /= j + 1;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Builds the `n`-point generalized Gauss–Laguerre rule at `prec` bits.
pub fn gauss_laguerre(alpha: f64, n: usize, prec: u32) -> Result<LaguerreRule> {
    const OP: &str = "gauss_laguerre";
    if n == 0 {
        return Err(Error::domain(OP, "need at least one node"));
    }
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::domain(OP, format!("alpha must exceed -1, got {alpha}")));
    }
    let wp = prec + GUARD_BITS;
    let alpha_f = Float::with_val(wp, alpha);
    let nf = n as u32;
    let ln_norm = {
        let top = ln_gamma(&Float::with_val(wp, Float::with_val(wp, &alpha_f + nf) + 1u32), wp)?;
        let bottom = ln_gamma(&Float::with_val(wp, nf + 1), wp)?;
        top - bottom
    };
    let norm = ln_norm.exp();
    // Recurrence rounding grows with n, so settle for half the guard bits.
    let eps_shift = (prec + GUARD_BITS / 2) as i32;
    let n_plus_alpha = Float::with_val(wp, &alpha_f + nf);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for guess in initial_nodes(alpha, n) {
        let mut x = Float::with_val(wp, guess);
        let mut converged = false;
        for _ in 0..100 {
            let (ln, lm1) = laguerre_pair(n, &alpha_f, &x);
            // x L_n' = n L_n - (n + alpha) L_{n-1}
            let mut deriv = Float::with_val(wp, &ln * nf);
            deriv -= Float::with_val(wp, &n_plus_alpha * &lm1);
            deriv /= &x;
            if deriv.is_zero() {
                break;
            }
            let step = Float::with_val(wp, &ln / &deriv);
            x -= &step;
            let tiny = Float::with_val(wp, x.abs_ref()) >> eps_shift;
            if Float::with_val(wp, step.abs_ref()) <= tiny {
                converged = true;
                break;
            }
        }
        if !converged || x.cmp0() != Some(std::cmp::Ordering::Greater) {
            return Err(Error::numerical(OP, format!("Newton refinement failed near node {guess} (n = {n})")));
        }
        let (_, lm1) = laguerre_pair(n, &alpha_f, &x);
        // w = Gamma(n+alpha+1) x / (n! (n+alpha)^2 L_{n-1}(x)^2)
        let denom = Float::with_val(wp, &n_plus_alpha * &lm1).square();
        let w = Float::with_val(wp, &norm * &x) / denom;
        nodes.push(Float::with_val(prec, &x));
        weights.push(Float::with_val(prec, &w));
    }
    for pair in nodes.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::numerical(OP, "nodes not strictly increasing after refinement"));
        }
    }
    Ok(LaguerreRule { alpha, nodes, weights })
}

/// Read-mostly, internally synchronized table of rules keyed by
/// `(alpha, node count, precision)`.
#[derive(Debug, Default)]
pub struct LaguerreCache {
    rules: RwLock<HashMap<(u64, usize, u32), Arc<LaguerreRule>>>,
}

impl LaguerreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, alpha: f64, n: usize, prec: u32) -> Result<Arc<LaguerreRule>> {
        let key = (alpha.to_bits(), n, prec);
        if let Some(rule) = self.rules.read().expect("laguerre cache poisoned").get(&key) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(gauss_laguerre(alpha, n, prec)?);
        let mut map = self.rules.write().expect("laguerre cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(rule)))
    }
}

/// Result of an adaptively refined Laguerre integral.
#[derive(Debug, Clone)]
pub struct LaguerreIntegral {
    pub value: Float,
    /// Node count of the rule that produced `value`.
    pub nodes: usize,
    /// Relative change against the previous (half-size) rule.
    pub rel_change: f64,
}

/// Integrates `t^alpha e^{-t} g(t)` over `(0, inf)`, doubling the node count
/// from `start_nodes` until successive results differ by less than `rel_tol`.
pub fn integrate_laguerre<G>(
    cache: &LaguerreCache,
    alpha: f64,
    start_nodes: usize,
    max_nodes: usize,
    rel_tol: f64,
    prec: u32,
    g: G,
) -> Result<LaguerreIntegral>
where
    G: Fn(&Float) -> Result<Float>,
{
    let mut n = start_nodes.max(1);
    let mut prev = cache.get(alpha, n, prec)?.integrate(&g)?;
    let mut last_change = f64::INFINITY;
    while n * 2 <= max_nodes {
        n *= 2;
        let cur = cache.get(alpha, n, prec)?.integrate(&g)?;
        let diff = Float::with_val(prec, &cur - &prev).abs();
        let change = if cur.is_zero() { diff.to_f64() } else { (diff / Float::with_val(prec, cur.abs_ref())).to_f64() };
        if change < rel_tol {
            return Ok(LaguerreIntegral { value: cur, nodes: n, rel_change: change });
        }
        last_change = change;
        prev = cur;
    }
    Err(Error::NoConvergence { op: "integrate_laguerre", iterations: n, partial: prev.to_f64(), bound: last_change })
}
