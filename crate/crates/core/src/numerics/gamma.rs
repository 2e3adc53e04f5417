//! Log-gamma and the first two polygamma functions.
//!
//! All three use the same scheme: shift the argument upward with the
//! functional recurrence until the Bernoulli asymptotic series converges to
//! the requested precision, then sum that series.

use std::cmp::Ordering;
use std::f64::consts::{LN_2, PI};

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer};

use crate::error::{Error, Result};

const GUARD_BITS: u32 = 32;
/// Integer arguments up to this bound take the exact factorial path.
const EXACT_FACTORIAL_LIMIT: u32 = 4096;

/// Smallest argument at which the asymptotic series reaches `prec` bits.
fn asymptotic_threshold(prec: u32) -> u64 {
    // terms behave like (2j)! / (2 pi y)^{2j}; the smallest one is ~ e^{-2 pi y}
    (f64::from(prec) * LN_2 / (2.0 * PI)).ceil() as u64 + 8
}

/// Iterator over the Bernoulli numbers B_2, B_4, ... at `prec` bits, built
/// from B_{2j} = (-1)^{j+1} 2 (2j)! zeta(2j) / (2 pi)^{2j}.
struct Bernoulli {
    prec: u32,
    j: u32,
    /// 2 (2j)! / (2 pi)^{2j}
    ratio: Float,
    two_pi_sq: Float,
}

impl Bernoulli {
    fn new(prec: u32) -> Self {
        let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
        let two_pi_sq = Float::with_val(prec, two_pi.square_ref());
        Self { prec, j: 0, ratio: Float::with_val(prec, 2), two_pi_sq }
    }
}

impl Iterator for Bernoulli {
    type Item = Float;

    fn next(&mut self) -> Option<Float> {
        self.j += 1;
        let j = self.j;
        self.ratio *= (2 * j - 1) * (2 * j);
        self.ratio /= &self.two_pi_sq;
        let zeta = Float::with_val(self.prec, Float::zeta_u(2 * j));
        let b = Float::with_val(self.prec, &self.ratio * &zeta);
        Some(if j % 2 == 1 { b } else { -b })
    }
}

fn check_positive(op: &'static str, x: &Float) -> Result<()> {
    if x.is_nan() || x.cmp0() != Some(Ordering::Greater) {
        return Err(Error::domain(op, format!("argument must be positive, got {}", x.to_f64())));
    }
    if x.is_infinite() {
        return Err(Error::domain(op, "argument must be finite"));
    }
    Ok(())
}

/// Number of unit shifts needed to lift `x` above `threshold`.
fn shift_count(x: &Float, threshold: u64) -> u64 {
    let t = Float::with_val(x.prec().max(64), threshold);
    if *x >= t {
        0
    } else {
        let gap = Float::with_val(64, &t - x).ceil();
        gap.to_f64() as u64
    }
}

/// Sums `sum_j coeff_j * B_{2j} * y^{-(2j + offset)}` until the terms drop
/// below `2^-prec` of `scale`.
fn bernoulli_tail(
    op: &'static str,
    y: &Float,
    prec: u32,
    offset: i32,
    scale: &Float,
    coeff: impl Fn(u32) -> Float,
) -> Result<Float> {
    let inv_y2 = Float::with_val(prec, y.square_ref()).recip();
    let mut y_pow = Float::with_val(prec, Pow::pow(y, -offset));
    let mut sum = Float::with_val(prec, 0);
    let eps = Float::with_val(prec, scale.abs_ref()) >> (prec as i32);
    let mut last = Float::with_val(prec, f64::INFINITY);
    for (idx, b) in Bernoulli::new(prec).enumerate() {
        let j = idx as u32 + 1;
        y_pow *= &inv_y2;
        let term = Float::with_val(prec, &b * &y_pow) * coeff(j);
        let mag = Float::with_val(prec, term.abs_ref());
        sum += &term;
        if mag <= eps {
            return Ok(sum);
        }
        if mag > last || j > 4 * prec {
            return Err(Error::NoConvergence {
                op,
                iterations: j as usize,
                partial: sum.to_f64(),
                bound: mag.to_f64(),
            });
        }
        last = mag;
    }
    unreachable!("Bernoulli iterator is infinite")
}

/// Natural log of the gamma function for real `x > 0`, at `prec` bits.
pub fn ln_gamma(x: &Float, prec: u32) -> Result<Float> {
    check_positive("ln_gamma", x)?;
    if x.is_integer() && *x <= EXACT_FACTORIAL_LIMIT {
        let n = x.to_u32_saturating().unwrap_or(1).saturating_sub(1);
        let fact = Integer::from(Integer::factorial(n));
        return Ok(Float::with_val(prec, &fact).ln());
    }
    let wp = prec + GUARD_BITS;
    let shifts = shift_count(x, asymptotic_threshold(wp));
    let mut y = Float::with_val(wp, x);
    let mut prod = Float::with_val(wp, 1);
    for _ in 0..shifts {
        prod *= &y;
        y += 1u32;
    }
    let ln_y = Float::with_val(wp, y.ln_ref());
    let half_ln_2pi = (Float::with_val(wp, Constant::Pi) * 2u32).ln() / 2u32;
    let mut main = Float::with_val(wp, &y - 0.5f64) * &ln_y;
    main -= &y;
    main += &half_ln_2pi;
    // B_{2j} / (2j (2j-1) y^{2j-1})
    let tail = bernoulli_tail("ln_gamma", &y, wp, -1, &main, |j| Float::with_val(wp, (2 * j) * (2 * j - 1)).recip())?;
    main += tail;
    main -= prod.ln();
    Ok(Float::with_val(prec, &main))
}

/// Polygamma Psi_0 (digamma) or Psi_1 (trigamma) for real `x > 0`.
pub fn polygamma(order: u32, x: &Float, prec: u32) -> Result<Float> {
    if order > 1 {
        return Err(Error::domain("polygamma", format!("order {order} unsupported, expected 0 or 1")));
    }
    check_positive("polygamma", x)?;
    let wp = prec + GUARD_BITS;
    let shifts = shift_count(x, asymptotic_threshold(wp));
    let mut y = Float::with_val(wp, x);
    let mut shift_sum = Float::with_val(wp, 0);
    for _ in 0..shifts {
        if order == 0 {
            shift_sum += Float::with_val(wp, y.recip_ref());
        } else {
            shift_sum += Float::with_val(wp, y.square_ref()).recip();
        }
        y += 1u32;
    }
    let value = if order == 0 {
        // ln y - 1/(2y) - sum B_{2j} / (2j y^{2j})
        let mut main = Float::with_val(wp, y.ln_ref());
        main -= Float::with_val(wp, y.recip_ref()) / 2u32;
        let tail = bernoulli_tail("polygamma", &y, wp, 0, &main, |j| Float::with_val(wp, 2 * j).recip())?;
        main - tail - shift_sum
    } else {
        // 1/y + 1/(2y^2) + sum B_{2j} / y^{2j+1}
        let inv = Float::with_val(wp, y.recip_ref());
        let mut main = Float::with_val(wp, &inv + Float::with_val(wp, inv.square_ref()) / 2u32);
        let tail = bernoulli_tail("polygamma", &y, wp, 1, &main, |_| Float::with_val(wp, 1))?;
        main += tail;
        main + shift_sum
    };
    Ok(Float::with_val(prec, &value))
}

/// `ln_gamma` rounded to `f64`, evaluated at 128 bits.
pub fn ln_gamma_f64(x: f64) -> Result<f64> {
    Ok(ln_gamma(&Float::with_val(128, x), 128)?.to_f64())
}

/// `polygamma` rounded to `f64`, evaluated at 128 bits.
pub fn polygamma_f64(order: u32, x: f64) -> Result<f64> {
    Ok(polygamma(order, &Float::with_val(128, x), 128)?.to_f64())
}
