//! Closed-form feasibility calculus for the randomized-response channel.
//!
//! With `P` the smallest prior mass, the channel satisfies
//! `(epsilon, delta)`-LIP exactly when
//!
//! ```text
//! delta >= (e^eps - 1) (1 - P (e^eps + 1)) / e^(2 eps)
//! ```
//!
//! Rearranged, this is the quadratic condition
//! `(delta + P) t^2 - t + 1 - P >= 0` in `t = e^eps`, whose roots delimit the
//! valid `epsilon` region.

use serde::Serialize;

use crate::error::{LipError, Result};
use crate::mechanism::{check_delta, check_epsilon};

fn check_p_min_open(p_min: f64) -> Result<()> {
    if p_min > 0.0 && p_min < 1.0 {
        Ok(())
    } else {
        Err(LipError::domain("p_min", p_min, "(0, 1)"))
    }
}

fn check_p_min_half(p_min: f64) -> Result<()> {
    if p_min > 0.0 && p_min <= 0.5 {
        Ok(())
    } else {
        Err(LipError::domain("p_min", p_min, "(0, 0.5]"))
    }
}

/// Smallest nonzero `epsilon` at which the channel is `(epsilon, 0)`-LIP.
///
/// Returns `ln(1/p_min - 1)`, or 0 when `p_min >= 1/2`. `epsilon = 0` is
/// always additionally valid.
pub fn min_epsilon_pure(p_min: f64) -> Result<f64> {
    check_p_min_open(p_min)?;
    if p_min >= 0.5 {
        return Ok(0.0);
    }
    Ok(((1.0 - p_min) / p_min).ln())
}

/// Minimal `delta` for which the channel is `(epsilon, delta)`-LIP.
pub fn delta_bound(p_min: f64, epsilon: f64) -> Result<f64> {
    check_p_min_open(p_min)?;
    check_epsilon(epsilon)?;
    if epsilon == 0.0 || epsilon >= min_epsilon_pure(p_min)? {
        return Ok(0.0);
    }
    let e = epsilon.exp();
    let value = epsilon.exp_m1() * (1.0 - p_min * (e + 1.0)) * (-2.0 * epsilon).exp();
    debug_assert!(value <= 0.25 + 1e-12);
    Ok(value.clamp(0.0, 1.0))
}

/// Smallest minimum prior mass for which `(epsilon, delta)`-LIP holds.
///
/// This is [`delta_bound`] solved for the prior mass:
/// `1/(e^eps + 1) - delta e^(2 eps) / (e^(2 eps) - 1)`, floored at 0.
/// At `epsilon = 0` every prior works and 0 is returned.
pub fn pmin_threshold(epsilon: f64, delta: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    if epsilon == 0.0 {
        return Ok(0.0);
    }
    let e = epsilon.exp();
    let value = 1.0 / (e + 1.0) - delta / (-(-2.0 * epsilon).exp_m1());
    Ok(value.max(0.0))
}

/// One connected piece of an [`EpsilonRegion`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    /// `f64::INFINITY` for an unbounded interval.
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    pub fn is_unbounded(&self) -> bool {
        self.hi == f64::INFINITY
    }
}

/// Which branch of the region analysis applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionCase {
    /// Small `delta`: a bounded low branch and an unbounded high branch.
    TwoBranch,
    /// Large `delta`: every `epsilon >= 0` is valid.
    AllEpsilon,
}

impl RegionCase {
    pub fn number(self) -> u8 {
        match self {
            RegionCase::TwoBranch => 1,
            RegionCase::AllEpsilon => 2,
        }
    }
}

/// The set of valid `epsilon` for a given `(p_min, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRegion {
    pub case: RegionCase,
    /// Disjoint and sorted.
    pub intervals: Vec<Interval>,
    /// `epsilon = 0` is valid for every prior.
    pub includes_zero: bool,
}

impl EpsilonRegion {
    pub fn contains(&self, epsilon: f64) -> bool {
        (epsilon == 0.0 && self.includes_zero) || self.intervals.iter().any(|i| i.contains(epsilon))
    }

    /// Start of the unbounded high-`epsilon` branch.
    pub fn high_branch_start(&self) -> f64 {
        self.intervals
            .last()
            .map(|i| i.lo)
            .expect("regions are never empty")
    }

    /// The excluded open interval between the branches, if any.
    pub fn gap(&self) -> Option<(f64, f64)> {
        match self.case {
            RegionCase::AllEpsilon => None,
            RegionCase::TwoBranch => Some((self.intervals[0].hi, self.intervals[1].lo)),
        }
    }
}

/// Valid `epsilon` region for minimum prior mass `p_min` and slack `delta`.
///
/// `p_min` must lie in `(0, 1/2]`, which holds for every prior with at least
/// two atoms.
pub fn epsilon_range(p_min: f64, delta: f64) -> Result<EpsilonRegion> {
    check_p_min_half(p_min)?;
    check_delta(delta)?;
    // Discriminant of (delta + p) t^2 - t + (1 - p), written so that the
    // delta = 0 case is exactly (1 - 2p)^2. It is <= 0 precisely when
    // delta >= 1/(4(1 - p)) - p.
    let disc = (1.0 - 2.0 * p_min).powi(2) - 4.0 * delta * (1.0 - p_min);
    let unbounded = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
        lo_closed: true,
        hi_closed: false,
    };
    if disc <= 0.0 {
        return Ok(EpsilonRegion {
            case: RegionCase::AllEpsilon,
            intervals: vec![unbounded],
            includes_zero: true,
        });
    }
    let s = delta + p_min;
    let r = disc.sqrt();
    let high_root = (1.0 + r) / (2.0 * s);
    // product of the roots is (1 - p)/s
    let low_root = 2.0 * (1.0 - p_min) / (1.0 + r);
    let low_hi = low_root.ln();
    debug_assert!(low_hi >= -1e-12, "low branch endpoint {low_hi}");
    let low_hi = low_hi.max(0.0);
    let high_lo = high_root.ln().max(low_hi);
    Ok(EpsilonRegion {
        case: RegionCase::TwoBranch,
        intervals: vec![
            Interval {
                lo: 0.0,
                hi: low_hi,
                lo_closed: true,
                hi_closed: true,
            },
            Interval {
                lo: high_lo,
                ..unbounded
            },
        ],
        includes_zero: true,
    })
}

/// A sample of the `epsilon`/`delta` tradeoff at fixed `p_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub epsilon: f64,
    pub delta_min: f64,
    pub p_min: f64,
}

/// Minimal `delta` along an `epsilon` grid.
pub fn tradeoff_curve(p_min: f64, epsilon_grid: &[f64]) -> Result<Vec<TradeoffPoint>> {
    check_p_min_half(p_min)?;
    epsilon_grid
        .iter()
        .map(|&epsilon| {
            Ok(TradeoffPoint {
                epsilon,
                delta_min: delta_bound(p_min, epsilon)?,
                p_min,
            })
        })
        .collect()
}

/// The infeasible `epsilon` gap at one prior mass; `gap` is `None` when
/// every `epsilon` is valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapBoundary {
    pub p_min: f64,
    /// `(end of the low branch, start of the high branch)`.
    pub gap: Option<(f64, f64)>,
}

/// Gap boundaries across a grid of minimum prior masses at fixed `delta`.
pub fn infeasible_region_boundary(delta: f64, p_min_grid: &[f64]) -> Result<Vec<GapBoundary>> {
    check_delta(delta)?;
    p_min_grid
        .iter()
        .map(|&p_min| {
            Ok(GapBoundary {
                p_min,
                gap: epsilon_range(p_min, delta)?.gap(),
            })
        })
        .collect()
}
