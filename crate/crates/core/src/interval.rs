//! Closed intervals over the extended half line `[0, +inf]`.
//!
//! Spectral thresholds are either finite brackets or the "at infinity"
//! sentinel `[inf, inf]`. A bracket with a finite lower end and an infinite
//! upper end means only the lower end is known.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "ext_real")]
    pub lo: f64,
    #[serde(with = "ext_real")]
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(!lo.is_nan() && !hi.is_nan(), "NaN interval endpoint");
        assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval::new(x, x)
    }

    /// The sentinel for a quantity that is `+inf`.
    pub fn infinite() -> Self {
        Interval {
            lo: f64::INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.lo == f64::INFINITY
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn midpoint(&self) -> f64 {
        if self.hi.is_finite() {
            0.5 * (self.lo + self.hi)
        } else {
            self.hi
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Pointwise minimum; the interval that contains `min(a, b)` whenever
    /// `a` lies in `self` and `b` in `other`.
    pub fn min(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.min(other.hi))
    }

    pub fn scale(&self, k: f64) -> Interval {
        debug_assert!(k > 0.0);
        Interval::new(self.lo * k, self.hi * k)
    }

    /// Widen by `abs` plus `rel` times each endpoint; the lower end is kept
    /// non-negative and infinite ends stay put.
    pub fn inflate(&self, abs: f64, rel: f64) -> Interval {
        let lo = if self.lo.is_finite() {
            (self.lo - abs - rel * self.lo.abs()).max(0.0)
        } else {
            self.lo
        };
        let hi = if self.hi.is_finite() {
            self.hi + abs + rel * self.hi.abs()
        } else {
            self.hi
        };
        Interval::new(lo, hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "[{:.6}, {:.6}]", self.lo, self.hi)
        }
    }
}

/// Serde adapter for extended reals: finite values as JSON numbers,
/// infinities as the strings `"inf"` / `"-inf"`.
pub mod ext_real {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *x == f64::INFINITY {
            s.serialize_str("inf")
        } else if *x == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    struct ExtVisitor;

    impl<'de> Visitor<'de> for ExtVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("not an extended real: {other}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtVisitor)
    }
}
