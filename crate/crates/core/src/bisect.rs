//! Threshold search for a monotone predicate that may answer "unknown".
//!
//! The predicate is expected to be `Below` up to some threshold `T` and
//! `Above` past it. Unknown answers are tolerated and widen the result.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Probe {
    Below,
    Above,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchPolicy {
    pub t_min: f64,
    pub t_max: f64,
    /// Stop when `hi / lo <= 1 + rel_resolution`.
    pub rel_resolution: f64,
    /// Points of the initial geometric sweep (including both ends).
    pub sweep: usize,
}

impl Default for SearchPolicy {
    fn default() -> Self {
        SearchPolicy {
            t_min: 1e-2,
            t_max: 100.0,
            rel_resolution: 1e-2,
            sweep: 9,
        }
    }
}

impl SearchPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max >= self.t_min && self.t_max.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "need 0 < t_min <= t_max < inf, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if !(self.rel_resolution > 0.0) {
            return Err(Error::InvalidParam("resolution must be positive".into()));
        }
        if self.sweep < 2 {
            return Err(Error::InvalidParam("sweep needs at least 2 points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// `[largest Below, smallest Above]`; `[0, t_min]` when `t_min` is
    /// already Above; the infinite sentinel when `t_max` is still Below.
    pub bracket: Interval,
    /// Every probe made, sorted by `t`.
    pub probes: Vec<(f64, Probe)>,
    /// Above at `t_min`.
    pub reaches_zero: bool,
    /// Some Below probe lies above an Above probe.
    pub non_monotone: bool,
}

impl ThresholdResult {
    pub fn inconclusive(&self) -> Vec<f64> {
        self.probes
            .iter()
            .filter(|(_, p)| *p == Probe::Unknown)
            .map(|(t, _)| *t)
            .collect()
    }
}

struct Cache<F> {
    probe: F,
    seen: BTreeMap<u64, (f64, Probe)>,
}

impl<F: Fn(f64) -> Probe + Sync> Cache<F> {
    fn get(&mut self, t: f64) -> Probe {
        if let Some(&(_, p)) = self.seen.get(&t.to_bits()) {
            return p;
        }
        let p = (self.probe)(t);
        self.seen.insert(t.to_bits(), (t, p));
        p
    }

    fn sorted(&self) -> Vec<(f64, Probe)> {
        let mut v: Vec<_> = self.seen.values().copied().collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    }
}

/// Brackets the switch point of `probe` on `[t_min, t_max]`.
pub fn threshold<F>(policy: &SearchPolicy, probe: F) -> Result<ThresholdResult>
where
    F: Fn(f64) -> Probe + Sync,
{
    policy.validate()?;
    let n = policy.sweep;
    let ratio = policy.t_max / policy.t_min;
    let grid: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                policy.t_min
            } else if k == n - 1 {
                policy.t_max
            } else {
                policy.t_min * ratio.powf(k as f64 / (n - 1) as f64)
            }
        })
        .collect();
    let first: Vec<(f64, Probe)> = grid.par_iter().map(|&t| (t, probe(t))).collect();
    let mut cache = Cache {
        probe,
        seen: first.iter().map(|&(t, p)| (t.to_bits(), (t, p))).collect(),
    };

    if first.iter().all(|(_, p)| *p == Probe::Unknown) {
        return Err(Error::AllInconclusive(format!(
            "no decisive probe on [{}, {}]",
            policy.t_min, policy.t_max
        )));
    }
    let at_max = first[n - 1].1;
    let at_min = first[0].1;
    if at_max == Probe::Below {
        let probes = cache.sorted();
        let non_monotone = probes.iter().any(|(_, p)| *p == Probe::Above);
        return Ok(ThresholdResult {
            bracket: Interval::infinite(),
            probes,
            reaches_zero: false,
            non_monotone,
        });
    }
    if at_min == Probe::Above {
        let probes = cache.sorted();
        let non_monotone = probes.iter().any(|(_, p)| *p == Probe::Below);
        return Ok(ThresholdResult {
            bracket: Interval::new(0.0, policy.t_min),
            probes,
            reaches_zero: true,
            non_monotone,
        });
    }

    let close = |lo: f64, hi: f64| hi <= lo * (1.0 + policy.rel_resolution);

    // largest Below
    let below = first
        .iter()
        .rev()
        .find(|(_, p)| *p == Probe::Below)
        .map(|x| x.0);
    if let Some(mut lo) = below {
        let mut hi = first
            .iter()
            .find(|(t, _)| *t > lo)
            .map(|x| x.0)
            .unwrap_or(policy.t_max);
        for _ in 0..64 {
            if close(lo, hi) {
                break;
            }
            let mid = (lo * hi).sqrt();
            if cache.get(mid) == Probe::Below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    // smallest Above
    let above = first.iter().find(|(_, p)| *p == Probe::Above).map(|x| x.0);
    if let Some(mut hi) = above {
        let mut lo = first
            .iter()
            .rev()
            .find(|(t, _)| *t < hi)
            .map(|x| x.0)
            .unwrap_or(policy.t_min);
        for _ in 0..64 {
            if close(lo, hi) {
                break;
            }
            let mid = (lo * hi).sqrt();
            if cache.get(mid) == Probe::Above {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    let probes = cache.sorted();
    let lo = probes
        .iter()
        .filter(|(_, p)| *p == Probe::Below)
        .map(|x| x.0)
        .fold(0.0, f64::max);
    let hi = probes
        .iter()
        .filter(|(_, p)| *p == Probe::Above)
        .map(|x| x.0)
        .fold(f64::INFINITY, f64::min);
    let non_monotone = lo > hi;
    let bracket = if non_monotone {
        Interval::new(hi, lo)
    } else {
        Interval::new(lo, hi)
    };
    Ok(ThresholdResult {
        bracket,
        probes,
        reaches_zero: false,
        non_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_at(t0: f64) -> impl Fn(f64) -> Probe + Sync {
        move |t| if t > t0 { Probe::Above } else { Probe::Below }
    }

    #[test]
    fn finds_a_clean_step() {
        let r = threshold(&SearchPolicy::default(), step_at(0.37)).unwrap();
        assert!(r.bracket.contains(0.37));
        assert!(r.bracket.hi <= r.bracket.lo * 1.01 + 1e-15);
        assert!(!r.non_monotone && !r.reaches_zero);
    }

    #[test]
    fn sentinels() {
        let r = threshold(&SearchPolicy::default(), |_| Probe::Below).unwrap();
        assert!(r.bracket.is_infinite());
        let r = threshold(&SearchPolicy::default(), |_| Probe::Above).unwrap();
        assert_eq!(r.bracket, Interval::new(0.0, 0.01));
        assert!(r.reaches_zero);
        assert!(matches!(
            threshold(&SearchPolicy::default(), |_| Probe::Unknown),
            Err(Error::AllInconclusive(_))
        ));
    }

    #[test]
    fn unknown_band_widens_bracket() {
        let p = |t: f64| {
            if t < 0.5 {
                Probe::Below
            } else if t < 2.0 {
                Probe::Unknown
            } else {
                Probe::Above
            }
        };
        let r = threshold(&SearchPolicy::default(), p).unwrap();
        assert!(r.bracket.lo < 0.5 && r.bracket.lo > 0.49);
        assert!(r.bracket.hi >= 2.0 && r.bracket.hi < 2.03);
        assert!(!r.inconclusive().is_empty());
        let r = threshold(&SearchPolicy::default(), |t: f64| {
            if t < 0.5 {
                Probe::Below
            } else {
                Probe::Unknown
            }
        })
        .unwrap();
        assert_eq!(r.bracket.hi, f64::INFINITY);
    }
}
