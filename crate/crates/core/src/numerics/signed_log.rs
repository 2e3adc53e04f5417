use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul, Neg};

use rug::float::Special;
use rug::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(x: &Float) -> Sign {
        match x.cmp0() {
            Some(Ordering::Less) => Sign::Negative,
            Some(Ordering::Greater) => Sign::Positive,
            _ => Sign::Zero,
        }
    }

    pub fn from_parity(k: usize) -> Sign {
        if k.is_multiple_of(2) {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }

    fn times(self, other: Sign) -> Sign {
        match self.as_i8() * other.as_i8() {
            -1 => Sign::Negative,
            0 => Sign::Zero,
            _ => Sign::Positive,
        }
    }
}

/// A real number stored as a sign and the natural log of its magnitude.
///
/// Used for quantities such as high lognormal moments whose magnitude is far
/// outside the range of an `f64`. `log_mag` is `-inf` when the sign is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedLogReal {
    sign: Sign,
    log_mag: Float,
}

impl SignedLogReal {
    pub fn zero(prec: u32) -> Self {
        Self { sign: Sign::Zero, log_mag: Float::with_val(prec, Special::NegInfinity) }
    }

    pub fn one(prec: u32) -> Self {
        Self { sign: Sign::Positive, log_mag: Float::with_val(prec, 0) }
    }

    /// Builds `sign * exp(log_mag)`. A zero sign ignores `log_mag`.
    pub fn from_parts(sign: Sign, log_mag: Float) -> Self {
        if sign == Sign::Zero {
            return Self::zero(log_mag.prec());
        }
        Self { sign, log_mag }
    }

    /// Positive value `exp(log_mag)`.
    pub fn from_log(log_mag: Float) -> Self {
        Self::from_parts(Sign::Positive, log_mag)
    }

    pub fn from_float(x: &Float) -> Self {
        let sign = Sign::of(x);
        if sign == Sign::Zero {
            return Self::zero(x.prec());
        }
        let log_mag = Float::with_val(x.prec(), x.abs_ref()).ln();
        Self { sign, log_mag }
    }

    pub fn from_f64(x: f64, prec: u32) -> Self {
        Self::from_float(&Float::with_val(prec, x))
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn log_mag(&self) -> &Float {
        &self.log_mag
    }

    pub fn prec(&self) -> u32 {
        self.log_mag.prec()
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    pub fn abs(&self) -> Self {
        match self.sign {
            Sign::Zero => self.clone(),
            _ => Self { sign: Sign::Positive, log_mag: self.log_mag.clone() },
        }
    }

    /// Decodes to an MPFR float at `prec` bits.
    pub fn to_float(&self, prec: u32) -> Float {
        if self.sign == Sign::Zero {
            return Float::with_val(prec, 0);
        }
        let v = Float::with_val(prec, self.log_mag.exp_ref());
        match self.sign {
            Sign::Negative => -v,
            _ => v,
        }
    }

    /// Decodes to `f64`, saturating to `±inf` or `0`.
    pub fn to_f64(&self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            Sign::Positive => self.log_mag.to_f64().exp(),
            Sign::Negative => -self.log_mag.to_f64().exp(),
        }
    }

    /// Multiplies by `exp(t)`.
    pub fn scale_exp(&self, t: &Float) -> Self {
        if self.sign == Sign::Zero {
            return self.clone();
        }
        Self { sign: self.sign, log_mag: Float::with_val(self.prec(), &self.log_mag + t) }
    }

    pub fn recip(&self) -> Self {
        Self { sign: self.sign, log_mag: -self.log_mag.clone() }
    }

    /// Log-domain addition: `max + ln(1 ± exp(min - max))`.
    pub fn add(&self, other: &Self) -> Self {
        if other.sign == Sign::Zero {
            return self.clone();
        }
        if self.sign == Sign::Zero {
            return other.clone();
        }
        let prec = self.prec().max(other.prec());
        let (big, small) = if self.log_mag >= other.log_mag { (self, other) } else { (other, self) };
        let d = Float::with_val(prec, &small.log_mag - &big.log_mag);
        if big.sign == small.sign {
            let corr = d.exp().ln_1p();
            Self { sign: big.sign, log_mag: Float::with_val(prec, &big.log_mag + &corr) }
        } else {
            if d.is_zero() {
                return Self::zero(prec);
            }
            // ln(1 - e^d) with d < 0
            let corr = (-d.exp_m1()).ln();
            Self { sign: big.sign, log_mag: Float::with_val(prec, &big.log_mag + &corr) }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&-other.clone())
    }

    /// Sums terms exactly in the MPFR exponent range at `prec` bits and
    /// re-encodes the result.
    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a SignedLogReal>, prec: u32) -> Self {
        let mut acc = super::CompensatedSum::new(prec);
        for t in terms {
            acc.add(&t.to_float(prec));
        }
        Self::from_float(&acc.value())
    }

    /// Compares magnitudes.
    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.sign, other.sign) {
            (Sign::Zero, Sign::Zero) => Ordering::Equal,
            (Sign::Zero, _) => Ordering::Less,
            (_, Sign::Zero) => Ordering::Greater,
            _ => self.log_mag.partial_cmp(&other.log_mag).unwrap_or(Ordering::Equal),
        }
    }

    /// `|self - other| / |other|` as an `f64`.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        if other.is_zero() {
            return if self.is_zero() { 0.0 } else { f64::INFINITY };
        }
        let diff = self.sub(other);
        if diff.is_zero() {
            return 0.0;
        }
        Float::with_val(53, &diff.log_mag - &other.log_mag).to_f64().exp()
    }
}

impl Neg for SignedLogReal {
    type Output = SignedLogReal;

    fn neg(self) -> Self::Output {
        let sign = match self.sign {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        };
        SignedLogReal { sign, log_mag: self.log_mag }
    }
}

impl Mul for &SignedLogReal {
    type Output = SignedLogReal;

    fn mul(self, rhs: &SignedLogReal) -> SignedLogReal {
        let sign = self.sign.times(rhs.sign);
        if sign == Sign::Zero {
            return SignedLogReal::zero(self.prec().max(rhs.prec()));
        }
        let prec = self.prec().max(rhs.prec());
        SignedLogReal { sign, log_mag: Float::with_val(prec, &self.log_mag + &rhs.log_mag) }
    }
}

impl Div for &SignedLogReal {
    type Output = SignedLogReal;

    fn div(self, rhs: &SignedLogReal) -> SignedLogReal {
        assert!(!rhs.is_zero(), "SignedLogReal division by zero");
        self * &rhs.recip()
    }
}

impl fmt::Display for SignedLogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => write!(f, "0"),
            s => write!(f, "{}exp({})", if s == Sign::Negative { "-" } else { "" }, self.log_mag.to_f64()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: u32 = 256;

    #[test]
    fn zero_and_one() {
        assert!(SignedLogReal::zero(P).is_zero());
        assert_eq!(SignedLogReal::one(P).to_f64(), 1.0);
        assert_eq!(SignedLogReal::from_f64(0.0, P).sign(), Sign::Zero);
    }

    #[test]
    fn huge_values_survive() {
        // e^1264 is far beyond f64 range
        let a = SignedLogReal::from_log(Float::with_val(P, 1264));
        let b = SignedLogReal::from_log(Float::with_val(P, 1263));
        let s = a.add(&b);
        let expect = 1264.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((s.log_mag().to_f64() - expect).abs() < 1e-12);
        let d = a.sub(&a);
        assert!(d.is_zero());
    }

    #[test]
    fn opposite_signs_cancel_correctly() {
        let a = SignedLogReal::from_f64(3.0, P);
        let b = SignedLogReal::from_f64(-2.5, P);
        assert!((a.add(&b).to_f64() - 0.5).abs() < 1e-15);
        assert!((b.add(&a).to_f64() - 0.5).abs() < 1e-15);
        let c = SignedLogReal::from_f64(-3.5, P);
        assert!((a.add(&c).to_f64() + 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(x in prop::num::f64::NORMAL) {
            let v = SignedLogReal::from_f64(x, P);
            let back = v.to_float(P).to_f64();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn arithmetic_matches_float(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            prop_assume!(a != 0.0 && b != 0.0);
            let x = SignedLogReal::from_f64(a, P);
            let y = SignedLogReal::from_f64(b, P);
            let prod = (&x * &y).to_f64();
            prop_assert!((prod - a * b).abs() <= 1e-14 * (a * b).abs());
            let sum = x.add(&y);
            let exact = Float::with_val(P, a) + b;
            let got = sum.to_float(P);
            let err = Float::with_val(P, &got - &exact).abs().to_f64();
            prop_assert!(err <= 1e-60 * (a.abs() + b.abs()));
        }
    }
}
