//! Outward-rounded `f64` intervals.
//!
//! Every operation widens its round-to-nearest result by one ulp on each side
//! (two for `ln`, whose libm implementation is only faithfully rounded), so
//! the exact real result always lies inside the returned interval.

use std::fmt;
use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

/// Result of comparing an enclosure against an exact value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Position {
    /// The whole interval lies strictly below the value.
    Below,
    /// The whole interval lies strictly above the value.
    Above,
    /// The interval contains the value or touches it; the comparison is undecided.
    Straddles,
}

const EXACT_INT_LIMIT: u64 = 1 << 53;

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    /// Degenerate interval around an exactly representable value.
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn from_u64(n: u64) -> Self {
        let x = n as f64;
        if n < EXACT_INT_LIMIT {
            Interval::point(x)
        } else {
            Interval {
                lo: x.next_down(),
                hi: x.next_up(),
            }
        }
    }

    /// Encloses `numer / denom`.
    pub fn from_ratio(numer: u64, denom: u64) -> Self {
        assert!(denom != 0);
        let q = numer as f64 / denom as f64;
        // Division by a power of two is exact for representable numerators.
        if numer < EXACT_INT_LIMIT && denom.is_power_of_two() {
            return Interval::point(q);
        }
        Interval {
            lo: q.next_down(),
            hi: q.next_up(),
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Natural logarithm; requires a strictly positive interval.
    pub fn ln(self) -> Interval {
        assert!(self.lo > 0.0, "ln of non-positive interval {self}");
        Interval {
            lo: self.lo.ln().next_down().next_down(),
            hi: self.hi.ln().next_up().next_up(),
        }
    }

    /// Where the interval sits relative to the exact value `x`.
    pub fn position(&self, x: f64) -> Position {
        if self.hi < x {
            Position::Below
        } else if self.lo > x {
            Position::Above
        } else {
            Position::Straddles
        }
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, other: Interval) -> Interval {
        Interval {
            lo: (self.lo + other.lo).next_down(),
            hi: (self.hi + other.hi).next_up(),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;

    fn sub(self, other: Interval) -> Interval {
        Interval {
            lo: (self.lo - other.hi).next_down(),
            hi: (self.hi - other.lo).next_up(),
        }
    }
}

impl Mul for Interval {
    type Output = Interval;

    fn mul(self, other: Interval) -> Interval {
        let products = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval {
            lo: lo.next_down(),
            hi: hi.next_up(),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}
