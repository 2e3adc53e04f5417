//! Extended-precision numerics shared by the rest of the crate.
//!
//! Everything here is a pure function of its arguments. Arithmetic is carried
//! out in MPFR floats at the precision requested through [`PrecisionConfig`].

mod gamma;
mod hypergeometric;
mod laguerre;
mod linalg;
mod normal;
mod qbinomial;
pub mod quadrature;
mod signed_log;

pub use gamma::{ln_gamma, ln_gamma_f64, polygamma, polygamma_f64};
pub use hypergeometric::{kummer_1f1_da_at_zero, kummer_1f1_neg_half};
pub use laguerre::{gauss_laguerre, integrate_laguerre, LaguerreCache, LaguerreIntegral, LaguerreRule};
pub use linalg::determinant;
pub use normal::{std_normal_cdf, std_normal_sf};
pub use qbinomial::{ln_q_binomial, q_binomial};
pub use quadrature::{GaussLegendre, GaussLegendreMp};
pub use signed_log::{Sign, SignedLogReal};

use rug::Float;

use crate::error::{Error, Result};

/// Working precision of the coefficient pipeline and default quadrature size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionConfig {
    working_bits: u32,
    quadrature_nodes: usize,
}

impl PrecisionConfig {
    pub const DEFAULT_BITS: u32 = 256;
    pub const DEFAULT_NODES: usize = 64;

    pub fn new(working_bits: u32, quadrature_nodes: usize) -> Result<Self> {
        if working_bits < 64 {
            return Err(Error::domain("PrecisionConfig", format!("working_bits must be >= 64, got {working_bits}")));
        }
        if quadrature_nodes == 0 {
            return Err(Error::domain("PrecisionConfig", "quadrature_nodes must be >= 1"));
        }
        Ok(Self { working_bits, quadrature_nodes })
    }

    pub fn working_bits(&self) -> u32 {
        self.working_bits
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.quadrature_nodes
    }

    /// Target relative accuracy of the special functions, 2^-(bits-8).
    pub fn tolerance(&self) -> Float {
        pow2(self.working_bits, -(self.working_bits as i32 - 8))
    }
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        Self { working_bits: Self::DEFAULT_BITS, quadrature_nodes: Self::DEFAULT_NODES }
    }
}

/// `2^e` at precision `prec`.
pub(crate) fn pow2(prec: u32, e: i32) -> Float {
    Float::with_val(prec, 1) << e
}

/// Neumaier-compensated accumulator over MPFR floats.
#[derive(Debug, Clone)]
pub(crate) struct CompensatedSum {
    sum: Float,
    carry: Float,
}

impl CompensatedSum {
    pub(crate) fn new(prec: u32) -> Self {
        Self { sum: Float::with_val(prec, 0), carry: Float::with_val(prec, 0) }
    }

    pub(crate) fn add(&mut self, term: &Float) {
        let prec = self.sum.prec();
        let t = Float::with_val(prec, &self.sum + term);
        if self.sum.cmp_abs(term) != Some(std::cmp::Ordering::Less) {
            self.carry += Float::with_val(prec, &self.sum - &t) + term;
        } else {
            self.carry += Float::with_val(prec, term - &t) + &self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> Float {
        Float::with_val(self.sum.prec(), &self.sum + &self.carry)
    }
}
