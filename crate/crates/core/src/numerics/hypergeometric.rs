//! Kummer's confluent hypergeometric function at the arguments needed by the
//! Nakagami product moments: `1F1(-k/2, b, z)` and its first-parameter
//! derivative at zero.
//!
//! The integrands only ever see `z <= 0`, where the defining series
//! alternates and cancels by roughly `|z| / ln 2` bits. For small `|z|` that
//! series is summed directly with enough guard bits and Neumaier
//! compensation; beyond [`DIRECT_LIMIT`] Kummer's transformation
//! `1F1(a, b, z) = e^z 1F1(b - a, b, -z)` turns it into a positive-term sum.

use std::cmp::Ordering;

use rug::Float;

use super::CompensatedSum;
use crate::error::{Error, Result};

const GUARD_BITS: u32 = 32;
const DIRECT_LIMIT: f64 = 16.0;

fn check_b(op: &'static str, b: &Float) -> Result<()> {
    if b.is_nan() || b.cmp0() != Some(Ordering::Greater) || b.is_infinite() {
        return Err(Error::domain(op, "b must be positive and finite"));
    }
    Ok(())
}

fn check_z(op: &'static str, z: &Float) -> Result<()> {
    if !z.is_finite() {
        return Err(Error::domain(op, "z must be finite"));
    }
    Ok(())
}

/// Bits lost to cancellation when summing an alternating series whose
/// largest term is about `e^{|z|}`.
fn cancellation_bits(z: &Float) -> u32 {
    (z.to_f64().abs() * std::f64::consts::LOG2_E).ceil() as u32
}

fn iteration_cap(z: &Float) -> usize {
    10_000 + 20 * z.to_f64().abs().ceil() as usize
}

/// `1F1(-k/2, b, z)` for integer `k >= 0`, `b > 0`.
///
/// Even `k` gives a terminating polynomial of degree `k/2`. Odd `k` sums the
/// infinite series until its tail bound falls below `2^-(prec-8)` relative.
pub fn kummer_1f1_neg_half(k: u32, b: &Float, z: &Float, prec: u32) -> Result<Float> {
    const OP: &str = "kummer_1f1_neg_half";
    check_b(OP, b)?;
    check_z(OP, z)?;
    if k == 0 || z.is_zero() {
        return Ok(Float::with_val(prec, 1));
    }
    let a = Float::with_val(prec + GUARD_BITS, -f64::from(k) / 2.0);
    if k.is_multiple_of(2) || z.to_f64() >= -DIRECT_LIMIT {
        hyp1f1_direct(OP, &a, b, z, prec)
    } else {
        hyp1f1_kummer(OP, &a, b, z, prec)
    }
}

/// Direct Maclaurin series of `1F1(a, b, z)`; terminates when `a` is a
/// non-positive integer.
pub(crate) fn hyp1f1_direct(op: &'static str, a: &Float, b: &Float, z: &Float, prec: u32) -> Result<Float> {
    let wp = prec + GUARD_BITS + if z.cmp0() == Some(Ordering::Less) { cancellation_bits(z) } else { 0 };
    let a = Float::with_val(wp, a);
    let b = Float::with_val(wp, b);
    let z = Float::with_val(wp, z);
    let tol = Float::with_val(wp, 1) >> (prec as i32 - 8);
    let abs_z = Float::with_val(wp, z.abs_ref());
    // (|a| + j) / (b + j) <= max(1, |a| / b)
    let growth = {
        let r = Float::with_val(wp, a.abs_ref()) / &b;
        if r > 1 {
            r
        } else {
            Float::with_val(wp, 1)
        }
    };
    let mut acc = CompensatedSum::new(wp);
    let mut term = Float::with_val(wp, 1);
    acc.add(&term);
    let cap = iteration_cap(&z);
    for n in 0..cap {
        let nf = n as u32;
        term *= Float::with_val(wp, &a + nf);
        if term.is_zero() {
            return Ok(Float::with_val(prec, &acc.value()));
        }
        term *= &z;
        term /= Float::with_val(wp, &b + nf);
        term /= nf + 1;
        acc.add(&term);
        let r = Float::with_val(wp, &abs_z * &growth) / (nf + 2);
        if r < 1 {
            let tail = Float::with_val(wp, term.abs_ref()) / (Float::with_val(wp, 1) - &r);
            let sum = acc.value();
            if tail <= Float::with_val(wp, sum.abs_ref()) * &tol {
                return Ok(Float::with_val(prec, &sum));
            }
        }
    }
    Err(Error::NoConvergence { op, iterations: cap, partial: acc.value().to_f64(), bound: term.to_f64().abs() })
}

/// `e^z 1F1(b - a, b, -z)` for `z < 0` and `b - a > 0`: every term of the
/// transformed series is positive.
pub(crate) fn hyp1f1_kummer(op: &'static str, a: &Float, b: &Float, z: &Float, prec: u32) -> Result<Float> {
    let wp = prec + GUARD_BITS;
    let b = Float::with_val(wp, b);
    let c = Float::with_val(wp, &b - a);
    let x = -Float::with_val(wp, z);
    debug_assert!(x > 0 && c > 0);
    let tol = Float::with_val(wp, 1) >> (prec as i32 - 8);
    // (c + j) / (b + j) <= max(1, c / b)
    let growth = {
        let r = Float::with_val(wp, &c / &b);
        if r > 1 {
            r
        } else {
            Float::with_val(wp, 1)
        }
    };
    let mut sum = Float::with_val(wp, 1);
    let mut term = Float::with_val(wp, 1);
    let cap = iteration_cap(z);
    for n in 0..cap {
        let nf = n as u32;
        term *= Float::with_val(wp, &c + nf);
        term *= &x;
        term /= Float::with_val(wp, &b + nf);
        term /= nf + 1;
        sum += &term;
        let r = Float::with_val(wp, &x * &growth) / (nf + 2);
        if r < 1 {
            let tail = Float::with_val(wp, &term / (Float::with_val(wp, 1) - &r));
            if tail <= Float::with_val(wp, &sum * &tol) {
                let scale = Float::with_val(wp, z.exp_ref());
                return Ok(Float::with_val(prec, &sum * &scale));
            }
        }
    }
    Err(Error::NoConvergence { op, iterations: cap, partial: sum.to_f64(), bound: term.to_f64() })
}

/// `d/da 1F1(a, b, z)` at `a = 0`, i.e. `sum_{n>=1} z^n / (n (b)_n)`.
///
/// For `z < -16` the equivalent positive-term form
/// `-e^z sum_{n>=1} [psi(b+n) - psi(b)] (-z)^n / n!` is used.
pub fn kummer_1f1_da_at_zero(b: &Float, z: &Float, prec: u32) -> Result<Float> {
    const OP: &str = "kummer_1f1_da_at_zero";
    check_b(OP, b)?;
    check_z(OP, z)?;
    if z.is_zero() {
        return Ok(Float::with_val(prec, 0));
    }
    if z.to_f64() >= -DIRECT_LIMIT {
        da_direct(b, z, prec)
    } else {
        da_kummer(b, z, prec)
    }
}

pub(crate) fn da_direct(b: &Float, z: &Float, prec: u32) -> Result<Float> {
    const OP: &str = "kummer_1f1_da_at_zero";
    let wp = prec + GUARD_BITS + if z.cmp0() == Some(Ordering::Less) { cancellation_bits(z) } else { 0 };
    let b = Float::with_val(wp, b);
    let z = Float::with_val(wp, z);
    let abs_z = Float::with_val(wp, z.abs_ref());
    let tol = Float::with_val(wp, 1) >> (prec as i32 - 8);
    let mut acc = CompensatedSum::new(wp);
    // pochhammer-weighted power z^n / (b)_n
    let mut p = Float::with_val(wp, 1);
    let cap = iteration_cap(&z);
    for n in 1..=cap {
        let nf = n as u32;
        p *= &z;
        p /= Float::with_val(wp, &b + (nf - 1));
        let term = Float::with_val(wp, &p / nf);
        acc.add(&term);
        // later ratios are bounded by |z| / (b + n)
        let r = Float::with_val(wp, &abs_z / Float::with_val(wp, &b + nf));
        if r < 1 {
            let tail = Float::with_val(wp, term.abs_ref()) * &r / (Float::with_val(wp, 1) - &r);
            let sum = acc.value();
            if tail <= Float::with_val(wp, sum.abs_ref()) * &tol {
                return Ok(Float::with_val(prec, &sum));
            }
        }
    }
    Err(Error::NoConvergence { op: OP, iterations: cap, partial: acc.value().to_f64(), bound: p.to_f64().abs() })
}

pub(crate) fn da_kummer(b: &Float, z: &Float, prec: u32) -> Result<Float> {
    const OP: &str = "kummer_1f1_da_at_zero";
    let wp = prec + GUARD_BITS;
    let b = Float::with_val(wp, b);
    let x = -Float::with_val(wp, z);
    let tol = Float::with_val(wp, 1) >> (prec as i32 - 8);
    let mut sum = Float::with_val(wp, 0);
    // x^n / n! and H_n = sum_{j<n} 1/(b+j)
    let mut power = Float::with_val(wp, 1);
    let mut harmonic = Float::with_val(wp, 0);
    let cap = iteration_cap(z);
    for n in 1..=cap {
        let nf = n as u32;
        power *= &x;
        power /= nf;
        harmonic += Float::with_val(wp, &b + (nf - 1)).recip();
        let term = Float::with_val(wp, &power * &harmonic);
        sum += &term;
        // H_{j+1}/H_j <= 1 + b/(b+j), so later ratios are below this bound
        let growth = Float::with_val(wp, 1) + Float::with_val(wp, &b / Float::with_val(wp, &b + (nf + 1)));
        let r = Float::with_val(wp, &x * &growth) / (nf + 2);
        if r < 1 {
            let tail = Float::with_val(wp, &term * &r) / (Float::with_val(wp, 1) - &r);
            if tail <= Float::with_val(wp, &sum * &tol) {
                let scale = Float::with_val(wp, z.exp_ref());
                return Ok(-Float::with_val(prec, &sum * &scale));
            }
        }
    }
    Err(Error::NoConvergence { op: OP, iterations: cap, partial: sum.to_f64(), bound: power.to_f64() })
}

#[cfg(test)]
// reference values are quoted to the digits of their source
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    const P: u32 = 256;

    fn f(x: f64) -> Float {
        Float::with_val(P, x)
    }

    fn rel(a: &Float, b: &Float) -> f64 {
        (Float::with_val(P, a - b) / b).abs().to_f64()
    }

    /// Plain Maclaurin series of 1F1(a, b, z) at a very high precision,
    /// independent of the routines under test.
    fn series_oracle(a: f64, b: f64, z: f64) -> Float {
        let wp = 4 * P + (z.abs() * 1.5) as u32;
        let (a, b, z) = (Float::with_val(wp, a), Float::with_val(wp, b), Float::with_val(wp, z));
        let mut sum = Float::with_val(wp, 1);
        let mut t = Float::with_val(wp, 1);
        let floor = Float::with_val(wp, 1) >> (2 * P as i32);
        for n in 0..20_000u32 {
            t *= Float::with_val(wp, &a + n);
            if t.is_zero() {
                break;
            }
            t *= &z;
            t /= Float::with_val(wp, &b + n);
            t /= n + 1;
            sum += &t;
            let past_peak = f64::from(n) > 2.0 * z.to_f64().abs() + a.to_f64().abs() + 50.0;
            if past_peak && Float::with_val(wp, t.abs_ref()) < floor {
                break;
            }
        }
        sum
    }

    #[test]
    fn trivial_cases() {
        for &z in &[-50.0, -1.0, 0.0, 3.0] {
            assert_eq!(kummer_1f1_neg_half(0, &f(2.5), &f(z), P).unwrap().to_f64(), 1.0);
        }
        // 1F1(-1, b, z) = 1 - z/b
        let v = kummer_1f1_neg_half(2, &f(3.0), &f(1.5), P).unwrap();
        assert!(rel(&v, &f(0.5)) < 1e-70);
    }

    #[test]
    fn odd_k_matches_reference_values() {
        let v = kummer_1f1_neg_half(1, &f(1.0), &f(-2.0), P).unwrap();
        assert!((v.to_f64() - 1.813099653480338207).abs() < 1e-15);
        assert!(rel(&v, &series_oracle(-0.5, 1.0, -2.0)) < 1e-70);
        let v = kummer_1f1_neg_half(3, &f(4.0), &f(-50.0), P).unwrap();
        assert!((v.to_f64() / 46.0936353657889161687 - 1.0).abs() < 1e-15);
        let v = kummer_1f1_neg_half(5, &f(0.5), &f(-300.0), P).unwrap();
        assert!((v.to_f64() / 1404573.468783877440415 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn direct_and_transformed_routes_agree() {
        for k in [1u32, 3, 7, 15] {
            for &b in &[0.5, 1.0, 4.0] {
                for &z in &[-0.3, -5.0, -16.0, -40.0] {
                    let a = f(-f64::from(k) / 2.0);
                    let d = hyp1f1_direct("t", &a, &f(b), &f(z), P).unwrap();
                    let t = hyp1f1_kummer("t", &a, &f(b), &f(z), P).unwrap();
                    assert!(rel(&d, &t) < 1e-70, "k={k} b={b} z={z}");
                }
            }
        }
    }

    #[test]
    fn even_k_is_a_terminating_polynomial() {
        // 1F1(-2, b, z) = 1 - 2z/b + z^2/(b(b+1))
        let (b, z) = (2.5, -7.0);
        let expect = 1.0 - 2.0 * z / b + z * z / (b * (b + 1.0));
        let v = kummer_1f1_neg_half(4, &f(b), &f(z), P).unwrap().to_f64();
        assert!((v - expect).abs() < 1e-13 * expect);
        let big = kummer_1f1_neg_half(32, &f(4.0), &f(-900.0), P).unwrap();
        assert!(rel(&big, &series_oracle(-16.0, 4.0, -900.0)) < 1e-70);
    }

    #[test]
    fn derivative_reference_values() {
        assert!(kummer_1f1_da_at_zero(&f(3.0), &f(0.0), P).unwrap().is_zero());
        let v = kummer_1f1_da_at_zero(&f(1.0), &f(1.0), P).unwrap();
        assert!((v.to_f64() - 1.3179021514544038949).abs() < 1e-15);
        let v = kummer_1f1_da_at_zero(&f(2.0), &f(-3.0), P).unwrap();
        assert!((v.to_f64() + 1.0056139785412182751).abs() < 1e-15);
        let v = kummer_1f1_da_at_zero(&f(4.0), &f(-200.0), P).unwrap();
        assert!((v.to_f64() + 4.0571249481162362047).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-6;
        for &b in &[0.5, 1.0, 4.0] {
            let mut z = 0.0;
            while z >= -20.0 {
                let fd = (series_oracle(h, b, z) - series_oracle(-h, b, z)) / (2.0 * h);
                let ours = kummer_1f1_da_at_zero(&f(b), &f(z), P).unwrap();
                let err = Float::with_val(P, &ours - &fd).abs().to_f64();
                assert!(err <= 1e-6 * ours.to_f64().abs().max(1e-300), "b={b} z={z} err={err}");
                z -= 2.5;
            }
        }
    }

    #[test]
    fn derivative_routes_agree() {
        for &b in &[0.5, 1.0, 4.0] {
            for &z in &[-0.5, -8.0, -16.0, -35.0] {
                let d = da_direct(&f(b), &f(z), P).unwrap();
                let t = da_kummer(&f(b), &f(z), P).unwrap();
                assert!(rel(&d, &t) < 1e-70, "b={b} z={z}");
            }
        }
    }

    #[test]
    fn rejects_bad_b() {
        assert!(kummer_1f1_neg_half(1, &f(0.0), &f(-1.0), P).is_err());
        assert!(kummer_1f1_da_at_zero(&f(-1.0), &f(-1.0), P).is_err());
    }
}
