use std::cmp::Ordering;

use rug::Float;

use super::SignedLogReal;
use crate::error::{Error, Result};

/// Log of the Gaussian binomial coefficient `[n k]_q` given `ln q > 0`.
///
/// Evaluates prod_{j=1..k} (q^{n-k+j} - 1)/(q^j - 1) as a sum of
/// `ln expm1(.)` terms, which stays accurate for q close to 1.
pub fn ln_q_binomial(n: i64, k: i64, ln_q: &Float, prec: u32) -> Result<Float> {
    if k < 0 || k > n {
        return Err(Error::domain("q_binomial", format!("k = {k} outside [0, {n}]")));
    }
    if ln_q.cmp0() != Some(Ordering::Greater) {
        return Err(Error::domain("q_binomial", "requires q > 1"));
    }
    let wp = prec + 16;
    let mut acc = Float::with_val(wp, 0);
    for j in 1..=k {
        let num = Float::with_val(wp, ln_q * (n - k + j)).exp_m1().ln();
        let den = Float::with_val(wp, ln_q * j).exp_m1().ln();
        acc += num;
        acc -= den;
    }
    Ok(Float::with_val(prec, &acc))
}

/// Gaussian binomial coefficient `[n k]_q` for `q > 1`, as a positive
/// log-domain value.
pub fn q_binomial(n: i64, k: i64, q: &Float, prec: u32) -> Result<SignedLogReal> {
    if q.is_nan() || *q <= 1 {
        return Err(Error::domain("q_binomial", "requires q > 1"));
    }
    let ln_q = Float::with_val(prec + 16, q.ln_ref());
    Ok(SignedLogReal::from_log(ln_q_binomial(n, k, &ln_q, prec)?))
}
