//! Rejection regions in the sufficient statistic.
//!
//! Fixed-threshold rules reject on an upper interval `ȳ > c` (normal) or an
//! upper set of counts `y >= y*` (binomial), so their power is a single tail
//! probability. CD-Adapt has a data-dependent threshold and its region is
//! traced on a grid, with every indicator change refined by bisection.

use super::DecisionRule;
use crate::distributions::{EndpointModel, Observation};
use crate::error::{Error, Result};
use crate::numerics::{ln_choose, std_normal_sf, GridSpec, DEFAULT_TOL};

/// Boundary of a monotone rejection region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalValue {
    /// Reject when `ȳ > c`; `c = -∞` rejects everything.
    Mean(f64),
    /// Reject when `y >= y*`; `y* = n + 1` never rejects.
    Count(u64),
    /// The normal-endpoint rule never rejects.
    NoRejection,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Mean { intervals: Vec<(f64, f64)>, se: f64 },
    Count { reject: Vec<bool>, ln_choose: Vec<f64> },
}

/// Set of outcomes on which a rule rejects, fixed for one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionRegion {
    repr: Repr,
}

impl RejectionRegion {
    fn mean(intervals: Vec<(f64, f64)>, se: f64) -> Self {
        Self { repr: Repr::Mean { intervals, se } }
    }

    fn count(reject: Vec<bool>) -> Self {
        let n = reject.len() as u64 - 1;
        let ln_choose = (0..=n).map(|y| ln_choose(n, y)).collect();
        Self { repr: Repr::Count { reject, ln_choose } }
    }

    /// Disjoint, sorted rejection intervals for the normal endpoint.
    pub fn intervals(&self) -> Option<&[(f64, f64)]> {
        match &self.repr {
            Repr::Mean { intervals, .. } => Some(intervals),
            Repr::Count { .. } => None,
        }
    }

    /// Rejection indicator over `y = 0..=n` for the binomial endpoint.
    pub fn rejected_counts(&self) -> Option<&[bool]> {
        match &self.repr {
            Repr::Count { reject, .. } => Some(reject),
            Repr::Mean { .. } => None,
        }
    }

    pub fn rejects(&self, obs: &Observation) -> bool {
        match (&self.repr, obs) {
            (Repr::Mean { intervals, .. }, Observation::SampleMean(y)) => {
                intervals.iter().any(|&(a, b)| *y > a && *y < b)
            }
            (Repr::Count { reject, .. }, Observation::Successes(y)) => {
                reject.get(*y as usize).copied().unwrap_or(false)
            }
            _ => false,
        }
    }

    /// Boundary of the region if it is an upper interval or upper set.
    pub fn critical_value(&self) -> Option<CriticalValue> {
        match &self.repr {
            Repr::Mean { intervals, .. } => match intervals.as_slice() {
                [] => Some(CriticalValue::NoRejection),
                [(a, b)] if *b == f64::INFINITY => Some(CriticalValue::Mean(*a)),
                _ => None,
            },
            Repr::Count { reject, .. } => {
                let first = reject.iter().position(|&r| r).unwrap_or(reject.len());
                reject[first..].iter().all(|&r| r).then_some(CriticalValue::Count(first as u64))
            }
        }
    }

    /// Probability of rejecting when the true parameter is `theta`.
    pub fn power(&self, theta: f64) -> f64 {
        match &self.repr {
            Repr::Mean { intervals, se } => intervals
                .iter()
                .map(|&(a, b)| tail(a, theta, *se) - tail(b, theta, *se))
                .sum::<f64>()
                .clamp(0.0, 1.0),
            Repr::Count { reject, ln_choose } => {
                let n = reject.len() - 1;
                if theta <= 0.0 {
                    return if reject[0] { 1.0 } else { 0.0 };
                }
                if theta >= 1.0 {
                    return if reject[n] { 1.0 } else { 0.0 };
                }
                let (ls, lf) = (theta.ln(), (-theta).ln_1p());
                reject
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r)
                    .map(|(y, _)| (ln_choose[y] + y as f64 * ls + (n - y) as f64 * lf).exp())
                    .sum::<f64>()
                    .min(1.0)
            }
        }
    }
}

/// `P(Ȳ > x)` for `Ȳ ~ N(theta, se²)`, with infinite ends handled exactly.
fn tail(x: f64, theta: f64, se: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else {
        std_normal_sf((x - theta) / se)
    }
}

/// Narrows `[lo, hi]` around the point where `pred` changes value.
fn refine<F: FnMut(f64) -> Result<bool>>(mut pred: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let at_lo = pred(lo)?;
    for _ in 0..200 {
        if hi - lo <= DEFAULT_TOL * lo.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid)? == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl DecisionRule {
    fn rejects_mean(&self, y: f64) -> Result<bool> {
        self.rejects(&Observation::SampleMean(y))
    }

    fn se(&self) -> f64 {
        self.model.standard_error(self.n).unwrap_or(f64::NAN)
    }

    /// Boundary of a fixed-threshold rule on the normal endpoint, by bracket
    /// expansion from `θ0` and bisection.
    fn mean_boundary(&self) -> Result<CriticalValue> {
        let se = self.se();
        let mut hi = self.hypothesis.theta0();
        let mut step = se;
        let mut found = false;
        for _ in 0..64 {
            if self.rejects_mean(hi)? {
                found = true;
                break;
            }
            hi += step;
            step *= 2.0;
        }
        if !found {
            return Ok(CriticalValue::NoRejection);
        }
        let mut lo = hi - se;
        step = se;
        found = false;
        for _ in 0..64 {
            if !self.rejects_mean(lo)? {
                found = true;
                break;
            }
            lo -= step;
            step *= 2.0;
        }
        if !found {
            return Ok(CriticalValue::Mean(f64::NEG_INFINITY));
        }
        Ok(CriticalValue::Mean(refine(|y| self.rejects_mean(y), lo, hi)?))
    }

    /// Traces the normal-endpoint region on a grid covering
    /// `[lo - span·se, hi + span·se]`. Intervals touching either end of the
    /// grid are extended to infinity.
    fn traced_mean_region(&self, lo: f64, hi: f64, grid: GridSpec) -> Result<Vec<(f64, f64)>> {
        let se = self.se();
        let start = lo - grid.span * se;
        let end = hi + grid.span * se;
        let h = se / grid.resolution as f64;
        let steps = ((end - start) / h).ceil() as usize;
        let xs: Vec<f64> = (0..=steps).map(|i| start + i as f64 * h).collect();
        let flags = xs.iter().map(|&x| self.rejects_mean(x)).collect::<Result<Vec<bool>>>()?;
        let mut intervals = Vec::new();
        let mut open = if flags[0] { Some(f64::NEG_INFINITY) } else { None };
        for i in 1..flags.len() {
            if flags[i] != flags[i - 1] {
                let x = refine(|y| self.rejects_mean(y), xs[i - 1], xs[i])?;
                match open.take() {
                    Some(a) => intervals.push((a, x)),
                    None => open = Some(x),
                }
            }
        }
        if let Some(a) = open {
            intervals.push((a, f64::INFINITY));
        }
        Ok(intervals)
    }

    fn count_flags(&self) -> Result<Vec<bool>> {
        (0..=self.n).map(|y| self.rejects(&Observation::Successes(y))).collect()
    }

    /// Rejection region with the default grid, tracing CD-Adapt over
    /// `θ0 ± 8` standard errors.
    pub fn rejection_region(&self) -> Result<RejectionRegion> {
        let theta0 = self.hypothesis.theta0();
        let half = 8.0 * self.se();
        self.rejection_region_over(theta0 - half, theta0 + half, GridSpec::default())
    }

    /// Rejection region accurate for power evaluated anywhere on `[lo, hi]`.
    ///
    /// Only CD-Adapt on the normal endpoint uses the window and grid; other
    /// rules have exact regions.
    pub fn rejection_region_over(&self, lo: f64, hi: f64, grid: GridSpec) -> Result<RejectionRegion> {
        match self.model {
            EndpointModel::Binomial => Ok(RejectionRegion::count(self.count_flags()?)),
            EndpointModel::Normal { .. } if self.is_adaptive() => {
                Ok(RejectionRegion::mean(self.traced_mean_region(lo, hi, grid)?, self.se()))
            }
            EndpointModel::Normal { .. } => {
                let intervals = match self.mean_boundary()? {
                    CriticalValue::Mean(c) => vec![(c, f64::INFINITY)],
                    _ => Vec::new(),
                };
                Ok(RejectionRegion::mean(intervals, self.se()))
            }
        }
    }

    /// Boundary of the rejection region, verified to be an upper interval or
    /// upper set. Fails with [`Error::NonMonotone`] otherwise.
    pub fn critical_value(&self) -> Result<CriticalValue> {
        let non_monotone = || Error::NonMonotone(format!("rule {} at n = {}", self.label, self.n));
        match self.model {
            EndpointModel::Binomial => {
                RejectionRegion::count(self.count_flags()?).critical_value().ok_or_else(non_monotone)
            }
            EndpointModel::Normal { .. } if self.is_adaptive() => {
                self.rejection_region()?.critical_value().ok_or_else(non_monotone)
            }
            EndpointModel::Normal { .. } => {
                let cv = self.mean_boundary()?;
                let centre = match cv {
                    CriticalValue::Mean(c) if c.is_finite() => c,
                    _ => self.hypothesis.theta0(),
                };
                let traced = self.traced_mean_region(centre, centre, GridSpec::default())?;
                let consistent = match (cv, traced.as_slice()) {
                    (CriticalValue::NoRejection, []) => true,
                    (CriticalValue::Mean(c), [(a, b)]) if *b == f64::INFINITY => {
                        c == f64::NEG_INFINITY && *a == f64::NEG_INFINITY
                            || (a - c).abs() <= 1e-8 * c.abs().max(1.0)
                    }
                    _ => false,
                };
                if consistent {
                    Ok(cv)
                } else {
                    Err(non_monotone())
                }
            }
        }
    }
}
