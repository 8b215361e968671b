//! Binary multiprecision reals with an attached working precision.
//!
//! `Real` wraps an `astro_float::BigFloat` and carries the precision (in bits)
//! that arithmetic on it should round to. Binary operations round to the larger
//! of the two operand precisions with round-half-to-even. Values are immutable;
//! every operation allocates a new result.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign as FloatSign, Word};
use num_bigint::{BigInt, Sign as IntSign};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;

/// Smallest precision accepted for model parameters.
pub const MIN_PRECISION_BITS: usize = 64;

/// Sign of a [`Real`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

#[derive(Clone)]
pub struct Real {
    value: BigFloat,
    bits: usize,
}

fn consts() -> Consts {
    Consts::new().expect("allocating the constant cache")
}

impl Real {
    fn wrap(value: BigFloat, bits: usize) -> Self {
        Real { value, bits }
    }

    pub fn zero(bits: usize) -> Self {
        Self::wrap(BigFloat::new(bits), bits)
    }

    pub fn one(bits: usize) -> Self {
        Self::from_i64(1, bits)
    }

    pub fn from_i64(v: i64, bits: usize) -> Self {
        let mut value = BigFloat::from_i64(v, bits.max(64));
        value.set_precision(bits, RM).expect("valid precision");
        Self::wrap(value, bits)
    }

    /// Exact for every finite `f64` once `bits >= 53`.
    pub fn from_f64(v: f64, bits: usize) -> Self {
        let mut value = BigFloat::from_f64(v, bits.max(64));
        value.set_precision(bits, RM).expect("valid precision");
        Self::wrap(value, bits)
    }

    /// Rounds an arbitrary integer to `bits` bits.
    pub fn from_bigint(n: &BigInt, bits: usize) -> Self {
        if n.is_zero() {
            return Self::zero(bits);
        }
        #[cfg(target_pointer_width = "64")]
        let words: Vec<Word> = n.magnitude().to_u64_digits();
        #[cfg(not(target_pointer_width = "64"))]
        let words: Vec<Word> = n.magnitude().to_u32_digits();
        let sign = match n.sign() {
            IntSign::Minus => FloatSign::Neg,
            _ => FloatSign::Pos,
        };
        let e = (words.len() * Word::BITS as usize) as i32;
        let mut value = BigFloat::from_words(&words, sign, e);
        value.set_precision(bits, RM).expect("valid precision");
        Self::wrap(value, bits)
    }

    /// Correctly rounded conversion of an exact rational.
    pub fn from_rational(q: &BigRational, bits: usize) -> Self {
        if q.denom().is_one() {
            return Self::from_bigint(q.numer(), bits);
        }
        let num_bits = q.numer().bits().max(1) as usize + 64;
        let den_bits = q.denom().bits().max(1) as usize + 64;
        let num = Self::from_bigint(q.numer(), num_bits);
        let den = Self::from_bigint(q.denom(), den_bits);
        Self::wrap(num.value.div(&den.value, bits, RM), bits)
    }

    /// Parses a decimal (`-1.25e3`) or rational (`7/3`) literal exactly and
    /// rounds once to `bits`.
    pub fn parse(s: &str, bits: usize) -> Result<Self> {
        Ok(Self::from_rational(&parse_rational(s)?, bits))
    }

    pub fn pi(bits: usize) -> Self {
        Self::wrap(consts().pi(bits, RM), bits)
    }

    pub fn precision(&self) -> usize {
        self.bits
    }

    /// Same value rounded (or exactly widened) to `bits`.
    pub fn with_precision(&self, bits: usize) -> Self {
        let mut value = self.value.clone();
        value.set_precision(bits, RM).expect("valid precision");
        Self::wrap(value, bits)
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !(self.value.is_nan() || self.value.is_inf())
    }

    pub fn is_negative(&self) -> bool {
        !self.is_zero() && self.value.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        !self.is_zero() && self.value.is_positive()
    }

    pub fn signum(&self) -> Sign {
        if self.is_zero() {
            Sign::Zero
        } else if self.value.is_negative() {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn abs(&self) -> Self {
        Self::wrap(self.value.abs(), self.bits)
    }

    /// Multiplies by `2^e` exactly.
    pub fn mul_pow2(&self, e: i64) -> Self {
        let mut value = self.value.clone();
        if let Some(cur) = value.exponent() {
            if !value.is_zero() {
                let target = cur as i64 + e;
                if target > i32::MAX as i64 || target < i32::MIN as i64 {
                    return Self::wrap(BigFloat::nan(None), self.bits);
                }
                value.set_exponent(target as i32);
            }
        }
        Self::wrap(value, self.bits)
    }

    pub fn sqrt(&self) -> Self {
        Self::wrap(self.value.sqrt(self.bits, RM), self.bits)
    }

    pub fn ln(&self) -> Self {
        Self::wrap(self.value.ln(self.bits, RM, &mut consts()), self.bits)
    }

    pub fn cos(&self) -> Self {
        Self::wrap(self.value.cos(self.bits, RM, &mut consts()), self.bits)
    }

    pub fn powi(&self, n: usize) -> Self {
        Self::wrap(self.value.powi(n, self.bits, RM), self.bits)
    }

    pub fn square(&self) -> Self {
        Self::wrap(self.value.mul(&self.value, self.bits, RM), self.bits)
    }

    pub fn floor(&self) -> Self {
        Self::wrap(self.value.floor(), self.bits)
    }

    pub fn max(&self, other: &Self) -> Self {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn min(&self, other: &Self) -> Self {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Binary exponent `e` with `2^(e-1) <= |x| < 2^e`; `None` for zero or
    /// non-finite values.
    pub fn binary_exponent(&self) -> Option<i32> {
        if self.is_zero() || !self.is_finite() {
            None
        } else {
            self.value.exponent()
        }
    }

    /// Nearest `f64` (via the decimal expansion); saturates to infinity.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if !self.is_finite() {
            return if self.value.is_nan() {
                f64::NAN
            } else if self.value.is_negative() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        match self.binary_exponent() {
            Some(e) if e > 1100 => {
                if self.is_negative() {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
            Some(e) if e < -1100 => 0.0,
            _ => self.with_precision(64).scientific_digits(20).parse::<f64>().unwrap_or(f64::NAN),
        }
    }

    /// Decimal digits and decimal exponent: value = 0.d1d2d3... × 10^exp.
    fn decimal_digits(&self) -> (bool, Vec<u8>, i32) {
        let mut widened = self.value.clone();
        widened.set_precision(self.bits + 32, RM).expect("valid precision");
        let (sign, mut digits, exp) =
            widened.convert_to_radix(Radix::Dec, RM, &mut consts()).expect("finite value converts to decimal");
        while digits.last() == Some(&0) {
            digits.pop();
        }
        (sign == FloatSign::Neg, digits, exp)
    }

    fn scientific_digits(&self, keep: usize) -> String {
        let (neg, mut digits, mut exp) = self.decimal_digits();
        round_digits(&mut digits, &mut exp, keep);
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        out.push((b'0' + digits[0]) as char);
        if digits.len() > 1 {
            out.push('.');
            out.extend(digits[1..].iter().map(|d| (b'0' + d) as char));
        }
        out.push('e');
        out.push_str(&(exp - 1).to_string());
        out
    }

    /// Shortest decimal string that parses back to this value at its
    /// precision. Positional notation is used for moderate exponents,
    /// scientific otherwise.
    pub fn to_decimal_string(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        if !self.is_finite() {
            return if self.value.is_nan() {
                "nan".into()
            } else if self.value.is_negative() {
                "-inf".into()
            } else {
                "inf".into()
            };
        }
        // ceil(bits * log10 2) + 2 significant digits always round-trip.
        let keep = (self.bits as u64 * 30103).div_ceil(100000) as usize + 2;
        let (neg, digits, exp) = self.decimal_digits();
        let render = |d: usize| {
            let mut ds = digits.clone();
            let mut e = exp;
            round_digits(&mut ds, &mut e, d);
            layout(neg, &ds, e)
        };
        let (mut lo, mut hi) = (1, keep);
        let mut best = render(keep);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let s = render(mid);
            if Real::parse(&s, self.bits).is_ok_and(|r| r == *self) {
                best = s;
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        best
    }
}

fn layout(neg: bool, digits: &[u8], exp: i32) -> String {
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    let push_digits = |out: &mut String, ds: &[u8]| {
        out.extend(ds.iter().map(|d| (b'0' + d) as char));
    };
    if (-6..=21).contains(&exp) {
        if exp <= 0 {
            out.push_str("0.");
            for _ in 0..(-exp) {
                out.push('0');
            }
            push_digits(&mut out, digits);
        } else {
            let int_len = exp as usize;
            if digits.len() <= int_len {
                push_digits(&mut out, digits);
                for _ in digits.len()..int_len {
                    out.push('0');
                }
            } else {
                push_digits(&mut out, &digits[..int_len]);
                out.push('.');
                push_digits(&mut out, &digits[int_len..]);
            }
        }
    } else {
        push_digits(&mut out, &digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            push_digits(&mut out, &digits[1..]);
        }
        out.push('e');
        out.push_str(&(exp - 1).to_string());
    }
    out
}

/// Rounds `0.d1d2... × 10^exp` half-up to `keep` digits.
fn round_digits(digits: &mut Vec<u8>, exp: &mut i32, keep: usize) {
    if digits.len() <= keep {
        return;
    }
    let up = digits[keep] >= 5;
    digits.truncate(keep);
    if up {
        let mut i = keep;
        loop {
            if i == 0 {
                digits.insert(0, 1);
                digits.truncate(keep);
                *exp += 1;
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    while digits.last() == Some(&0) {
        digits.pop();
    }
}

/// Parses `p/q` or a decimal literal with optional exponent into an exact
/// rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = |reason: &str| Error::Parse { field: "number", reason: alloc::format!("{reason}: {s:?}") };
    let s = s.trim();
    if s.is_empty() {
        return Err(bad("empty literal"));
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad("bad numerator"))?;
        let q: BigInt = q.trim().parse().map_err(|_| bad("bad denominator"))?;
        if q.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(BigRational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..].parse().map_err(|_| bad("bad exponent"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("no digits"));
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad("invalid digit"));
    }
    if exponent.unsigned_abs() > 100_000 {
        return Err(bad("exponent out of range"));
    }
    let mut digits = String::with_capacity(int_part.len() + frac_part.len());
    digits.push_str(int_part);
    digits.push_str(frac_part);
    let mut n: BigInt =
        if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad("bad digits"))? };
    if neg {
        n = -n;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    Ok(if scale >= 0 { BigRational::from_integer(n * pow) } else { BigRational::new(n, pow) })
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({}, {} bits)", self.to_decimal_string(), self.bits)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.cmp(&other.value).map(|c| c.cmp(&0))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl<'a> $trait<&'a Real> for &'a Real {
            type Output = Real;
            fn $method(self, rhs: &'a Real) -> Real {
                let bits = self.bits.max(rhs.bits);
                Real::wrap(self.value.$method(&rhs.value, bits, RM), bits)
            }
        }
        impl $trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &'a Real) -> Real {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Real> for &'a Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real::wrap(self.value.clone().neg(), self.bits)
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    #[test]
    fn bigint_conversion_is_exact() {
        let n: BigInt = "340282366920938463463374607431768211457".parse().unwrap();
        let r = Real::from_bigint(&n, 256);
        assert_eq!(r.to_decimal_string(), "3.40282366920938463463374607431768211457e38");
        let neg = Real::from_bigint(&-n, 256);
        assert!(neg.is_negative());
    }

    #[test]
    fn rational_literals() {
        let third = Real::parse("1/3", 128).unwrap();
        let sum = &(&third + &third) + &third;
        assert!((&sum - &Real::one(128)).abs() < Real::from_f64(1e-37, 128));
        assert_eq!(Real::parse("-1.25e3", 64).unwrap(), Real::from_i64(-1250, 64));
        assert_eq!(Real::parse(".5", 64).unwrap(), Real::from_f64(0.5, 64));
        assert!(Real::parse("1/0", 64).is_err());
        assert!(Real::parse("abc", 64).is_err());
        assert!(Real::parse("", 64).is_err());
    }

    #[test]
    fn decimal_exactness_of_lambda() {
        // 0.1 parsed exactly then rounded once: equals the correctly rounded quotient.
        let a = Real::parse("0.1", 200).unwrap();
        let b = &Real::one(200) / &Real::from_i64(10, 200);
        assert_eq!(a, b);
    }

    #[test]
    fn formatting() {
        assert_eq!(Real::from_i64(2, 64).to_decimal_string(), "2");
        assert_eq!(Real::from_f64(-2.75, 64).to_decimal_string(), "-2.75");
        assert_eq!(Real::from_f64(0.015625, 64).to_decimal_string(), "0.015625");
        let tiny = Real::one(128).mul_pow2(-200);
        assert!(tiny.to_decimal_string().contains("e-61"));
        assert_eq!(Real::zero(64).to_decimal_string(), "0");
        assert_eq!(format!("{}", Real::from_i64(1000, 64)), "1000");
    }

    #[test]
    fn formatting_rounds_and_round_trips() {
        assert_eq!(Real::parse("1e-16", 512).unwrap().to_decimal_string(), "1e-16");
        assert_eq!(Real::parse("0.1", 300).unwrap().to_decimal_string(), "0.1");
        for s in ["1/3", "-22/7", "2e-40", "123456789/1000"] {
            let x = Real::parse(s, 256).unwrap();
            assert_eq!(Real::parse(&x.to_decimal_string(), 256).unwrap(), x, "{s}");
        }
        let mut digits = alloc::vec![9, 9, 9, 7];
        let mut exp = 0;
        round_digits(&mut digits, &mut exp, 3);
        assert_eq!((digits, exp), (alloc::vec![1], 1));
    }

    #[test]
    fn pow2_scaling_is_exact() {
        let x = Real::parse("3/7", 256).unwrap();
        assert_eq!(x.mul_pow2(300).mul_pow2(-300), x);
        assert!(Real::zero(64).mul_pow2(10).is_zero());
    }

    #[test]
    fn to_f64_roundtrip() {
        assert_eq!(Real::from_f64(3.25, 128).to_f64(), 3.25);
        assert!((Real::pi(256).to_f64() - core::f64::consts::PI).abs() < 1e-15);
        assert_eq!(Real::one(64).mul_pow2(5000).to_f64(), f64::INFINITY);
    }

    #[test]
    fn sign_and_order() {
        let a = Real::from_i64(-3, 64);
        let b = Real::from_i64(5, 64);
        assert!(a < b);
        assert_eq!(a.signum(), Sign::Negative);
        assert_eq!(Real::zero(64).signum(), Sign::Zero);
        assert_eq!(a.max(&b), b);
        assert_eq!((&a * &b).precision(), 64);
        assert_eq!((&a * &b.with_precision(128)).precision(), 128);
    }
}
