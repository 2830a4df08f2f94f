//! Scalar modes: exact rationals and certified intervals.

use std::fmt::{self, Debug};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::interval::Interval;

/// Certified sign of a scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
    /// Interval straddles zero.
    Unknown,
}

/// Exact rational scalar. Serialized as the string `"n/d"` (or `"n"`).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(pub BigRational);

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                Rational(self.0.$m(rhs.0))
            }
        }
        impl<'a> $tr<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $m(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$m(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Rational {
    pub fn new(n: BigInt, d: BigInt) -> Self {
        Rational(BigRational::new(n, d))
    }

    pub fn integer(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn pow(&self, e: u32) -> Rational {
        Rational(num_traits::pow(self.0.clone(), e as usize))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact rational value of a finite float.
    pub fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(Rational)
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom() == &BigInt::from(1) {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Rational {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid rational `{s}`")))
    }
}

/// Field operations shared by the rational and interval modes.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Whether equality and sign tests are decided exactly.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    fn ratio(n: i64, d: i64) -> Self;
    fn to_interval(&self) -> Interval;
    /// `Some` only in interval mode.
    fn from_interval(x: Interval) -> Option<Self>;
    /// `Some` only in rational mode.
    fn to_rational(&self) -> Option<Rational>;
    fn sign(&self) -> Sign;
    /// Exact equality for rationals; overlap for intervals.
    fn possibly_equal(&self, other: &Self) -> bool;
    /// Exact square root when it exists in the scalar mode.
    fn try_sqrt(&self) -> Option<Self>;
    fn abs(&self) -> Self;

    fn neg_part(&self) -> Self {
        match self.sign() {
            Sign::Negative => -self.clone(),
            Sign::Zero | Sign::Positive => Self::zero(),
            // only reachable for interval scalars, which override this
            Sign::Unknown => Self::zero(),
        }
    }

    fn is_certainly_positive(&self) -> bool {
        self.sign() == Sign::Positive
    }

    fn is_certainly_nonneg(&self) -> bool {
        matches!(self.sign(), Sign::Positive | Sign::Zero)
    }

    fn is_certainly_negative(&self) -> bool {
        self.sign() == Sign::Negative
    }

    fn possibly_zero(&self) -> bool {
        matches!(self.sign(), Sign::Zero | Sign::Unknown)
    }

    fn midpoint_f64(&self) -> f64 {
        self.to_interval().mid()
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Rational(Zero::zero())
    }

    fn one() -> Self {
        Rational(One::one())
    }

    fn from_i64(n: i64) -> Self {
        Rational::integer(n)
    }

    fn ratio(n: i64, d: i64) -> Self {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn to_interval(&self) -> Interval {
        rational_to_interval(self)
    }

    fn from_interval(_: Interval) -> Option<Self> {
        None
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn sign(&self) -> Sign {
        if self.0.is_zero() {
            Sign::Zero
        } else if self.0.is_positive() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    fn possibly_equal(&self, other: &Self) -> bool {
        self == other
    }

    fn try_sqrt(&self) -> Option<Self> {
        if self.0.is_negative() {
            return None;
        }
        let n = self.0.numer().sqrt();
        let d = self.0.denom().sqrt();
        if &(&n * &n) == self.0.numer() && &(&d * &d) == self.0.denom() {
            Some(Rational::new(n, d))
        } else {
            None
        }
    }

    fn abs(&self) -> Self {
        Rational(Signed::abs(&self.0))
    }
}

impl Scalar for Interval {
    const EXACT: bool = false;

    fn zero() -> Self {
        Interval::ZERO
    }

    fn one() -> Self {
        Interval::ONE
    }

    fn from_i64(n: i64) -> Self {
        let x = n as f64;
        if x as i64 == n {
            Interval::point(x)
        } else {
            Interval::new(x.next_down(), x.next_up())
        }
    }

    fn ratio(n: i64, d: i64) -> Self {
        Self::from_i64(n) / Self::from_i64(d)
    }

    fn to_interval(&self) -> Interval {
        *self
    }

    fn from_interval(x: Interval) -> Option<Self> {
        Some(x)
    }

    fn to_rational(&self) -> Option<Rational> {
        None
    }

    fn sign(&self) -> Sign {
        if self.lo() > 0.0 {
            Sign::Positive
        } else if self.hi() < 0.0 {
            Sign::Negative
        } else if self.lo() == 0.0 && self.hi() == 0.0 {
            Sign::Zero
        } else {
            Sign::Unknown
        }
    }

    fn possibly_equal(&self, other: &Self) -> bool {
        self.overlaps(other)
    }

    fn try_sqrt(&self) -> Option<Self> {
        if self.hi() < 0.0 {
            None
        } else {
            Some(self.sqrt())
        }
    }

    fn abs(&self) -> Self {
        Interval::abs(self)
    }

    fn neg_part(&self) -> Self {
        Interval::neg_part(self)
    }
}

/// Tightest `f64` enclosure of a rational; zero width when representable.
pub fn rational_to_interval(r: &Rational) -> Interval {
    let r = &r.0;
    let x = r.to_f64().unwrap_or(f64::NAN);
    assert!(x.is_finite(), "rational out of f64 range");
    match BigRational::from_float(x) {
        Some(exact) if &exact == r => Interval::point(x),
        Some(exact) => {
            if &exact < r {
                Interval::new(x, x.next_up())
            } else {
                Interval::new(x.next_down(), x)
            }
        }
        None => Interval::new(x.next_down(), x.next_up()),
    }
}

/// Parse `"a/b"`, `"a"` or a decimal literal such as `"1.25"` into a rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let n: BigInt = digits.parse().ok()?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(n, d);
        return Some(if neg { -r } else { r });
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rational(BigRational::from_integer(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_sqrt_only_for_squares() {
        assert_eq!(
            Rational::ratio(9, 4).try_sqrt(),
            Some(Rational::ratio(3, 2))
        );
        assert_eq!(Rational::ratio(2, 1).try_sqrt(), None);
        assert_eq!(Rational::ratio(-4, 1).try_sqrt(), None);
    }

    #[test]
    fn rational_enclosure() {
        let third = rational_to_interval(&Rational::ratio(1, 3));
        assert!(!third.is_point());
        assert!(third.width() <= 1e-16);
        assert!(rational_to_interval(&Rational::ratio(3, 4)).is_point());
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/6"), Some(Rational::ratio(1, 2)));
        assert_eq!(parse_rational("-1.25"), Some(Rational::ratio(-5, 4)));
        assert_eq!(parse_rational("7"), Some(Rational::from_i64(7)));
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn serde_as_string() {
        let r = Rational::ratio(-2, 6);
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(j, "\"-1/3\"");
        let back: Rational = serde_json::from_str(&j).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn interval_signs() {
        assert_eq!(Interval::new(-1.0, 1.0).sign(), Sign::Unknown);
        assert_eq!(Interval::ZERO.sign(), Sign::Zero);
        assert!(Interval::new(-2.0, -1.0).is_certainly_negative());
    }
}
