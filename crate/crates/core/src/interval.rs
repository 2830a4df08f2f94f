//! Closed intervals over `f64` with outward (directed) rounding.
//!
//! Basic arithmetic uses error-free transformations (two-sum, fma residuals)
//! so an operation whose floating result is exact keeps a zero-width
//! interval. Transcendental functions are widened by a fixed number of ulps.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Ulps added on each side after a libm call.
const LIBM_ULPS: u32 = 2;

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

fn down(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        x
    } else {
        x.next_down()
    }
}

fn up(x: f64) -> f64 {
    if x == f64::INFINITY {
        x
    } else {
        x.next_up()
    }
}

fn widen_ulps(x: f64, n: u32, upward: bool) -> f64 {
    let mut y = x;
    for _ in 0..n {
        y = if upward { up(y) } else { down(y) };
    }
    y
}

/// `a + b` rounded toward -inf (`upward = false`) or +inf.
fn add_dir(a: f64, b: f64, upward: bool) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    match (upward, err.partial_cmp(&0.0)) {
        (true, Some(std::cmp::Ordering::Greater)) => up(s),
        (false, Some(std::cmp::Ordering::Less)) => down(s),
        _ => s,
    }
}

fn mul_dir(a: f64, b: f64, upward: bool) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if p.abs() < f64::MIN_POSITIVE {
        // subnormal or underflowed: the fma residual is not reliable here
        return if upward { up(p) } else { down(p) };
    }
    let err = a.mul_add(b, -p);
    if upward && err > 0.0 {
        up(p)
    } else if !upward && err < 0.0 {
        down(p)
    } else {
        p
    }
}

fn div_dir(a: f64, b: f64, upward: bool) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    if q.abs() < f64::MIN_POSITIVE {
        return if upward { up(q) } else { down(q) };
    }
    // a - q*b exactly; the true quotient is q + r/b
    let r = (-q).mul_add(b, a);
    let sign = r * b.signum();
    if upward && sign > 0.0 {
        up(q)
    } else if !upward && sign < 0.0 {
        down(q)
    } else {
        q
    }
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Smallest interval containing every argument.
    pub fn hull_of(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    /// Symmetric enclosure `[x - r, x + r]` with outward rounding.
    pub fn around(x: f64, r: f64) -> Self {
        Interval::new(add_dir(x, -r, false), add_dir(x, r, true))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    pub fn width(&self) -> f64 {
        add_dir(self.hi, -self.lo, true)
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_positive(&self) -> bool {
        self.lo > 0.0
    }

    pub fn is_negative(&self) -> bool {
        self.hi < 0.0
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval {
                lo: 0.0,
                hi: self.mag(),
            }
        }
    }

    /// `max(-x, 0)` applied pointwise.
    pub fn neg_part(&self) -> Interval {
        Interval {
            lo: (-self.hi).max(0.0),
            hi: (-self.lo).max(0.0),
        }
    }

    pub fn pos_part(&self) -> Interval {
        Interval {
            lo: self.lo.max(0.0),
            hi: self.hi.max(0.0),
        }
    }

    pub fn max(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn min(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn sqr(&self) -> Interval {
        let a = self.abs();
        Interval {
            lo: mul_dir(a.lo, a.lo, false),
            hi: mul_dir(a.hi, a.hi, true),
        }
    }

    /// Square root of the non-negative part of the interval.
    pub fn sqrt(&self) -> Interval {
        let lo = self.lo.max(0.0);
        let hi = self.hi.max(0.0);
        Interval {
            lo: sqrt_dir(lo, false),
            hi: sqrt_dir(hi, true),
        }
    }

    /// `x^q` for `q >= 0`, on the non-negative part of the interval.
    pub fn powf(&self, q: f64) -> Interval {
        assert!(q >= 0.0, "negative exponent");
        let lo = self.lo.max(0.0);
        let hi = self.hi.max(0.0);
        if q == 0.0 {
            return Interval::ONE;
        }
        if q == 1.0 {
            return Interval { lo, hi };
        }
        if q == 2.0 {
            return Interval { lo, hi }.sqr();
        }
        let f = |x: f64, upward: bool| {
            if x == 0.0 {
                0.0
            } else {
                let v = widen_ulps(x.powf(q), LIBM_ULPS, upward);
                if upward {
                    v
                } else {
                    v.max(0.0)
                }
            }
        };
        Interval {
            lo: f(lo, false),
            hi: f(hi, true),
        }
    }

    /// Raise an interval with positive lower bound to an interval exponent.
    pub fn pow_interval(&self, q: &Interval) -> Interval {
        (*q * self.ln()).exp()
    }

    pub fn exp2(&self) -> Interval {
        if self.is_point() && self.lo.fract() == 0.0 && self.lo.abs() < 1000.0 {
            return Interval::point(self.lo.exp2());
        }
        Interval {
            lo: widen_ulps(self.lo.exp2(), LIBM_ULPS, false).max(0.0),
            hi: widen_ulps(self.hi.exp2(), LIBM_ULPS, true),
        }
    }

    pub fn exp(&self) -> Interval {
        Interval {
            lo: widen_ulps(self.lo.exp(), LIBM_ULPS, false).max(0.0),
            hi: widen_ulps(self.hi.exp(), LIBM_ULPS, true),
        }
    }

    /// Natural logarithm; the interval must be strictly positive.
    pub fn ln(&self) -> Interval {
        assert!(self.lo > 0.0, "log of non-positive interval");
        Interval {
            lo: widen_ulps(self.lo.ln(), LIBM_ULPS, false),
            hi: widen_ulps(self.hi.ln(), LIBM_ULPS, true),
        }
    }

    pub fn log2(&self) -> Interval {
        assert!(self.lo > 0.0, "log of non-positive interval");
        Interval {
            lo: widen_ulps(self.lo.log2(), LIBM_ULPS, false),
            hi: widen_ulps(self.hi.log2(), LIBM_ULPS, true),
        }
    }

    /// `2^p` with `p` given as an `f64`.
    pub fn two_pow(p: f64) -> Interval {
        Interval::point(p).exp2()
    }

    /// An enclosure of ln 2.
    pub fn ln2() -> Interval {
        Interval::around(std::f64::consts::LN_2, f64::EPSILON)
    }
}

fn sqrt_dir(x: f64, upward: bool) -> f64 {
    let r = x.sqrt();
    if r == 0.0 {
        return 0.0;
    }
    let res = (-r).mul_add(r, x);
    if upward && res > 0.0 {
        up(r)
    } else if !upward && res < 0.0 {
        down(r)
    } else {
        r
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.17e}, {:.17e}]", self.lo, self.hi)
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_dir(self.lo, rhs.lo, false),
            hi: add_dir(self.hi, rhs.hi, true),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_dir(self.lo, -rhs.hi, false),
            hi: add_dir(self.hi, -rhs.lo, true),
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let corners = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let lo = corners
            .iter()
            .map(|&(a, b)| mul_dir(a, b, false))
            .fold(f64::INFINITY, f64::min);
        let hi = corners
            .iter()
            .map(|&(a, b)| mul_dir(a, b, true))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }
}

impl Div for Interval {
    type Output = Interval;
    fn div(self, rhs: Interval) -> Interval {
        assert!(
            !rhs.contains(0.0),
            "interval division by an interval containing zero: {rhs:?}"
        );
        let corners = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let lo = corners
            .iter()
            .map(|&(a, b)| div_dir(a, b, false))
            .fold(f64::INFINITY, f64::min);
        let hi = corners
            .iter()
            .map(|&(a, b)| div_dir(a, b, true))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }
}

impl Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |a, b| a + b)
    }
}
