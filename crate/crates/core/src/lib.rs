//! Context-aware randomized response under `(epsilon, delta)` local
//! information privacy.
//!
//! The crate covers:
//!
//! * [`pmf`]: validated discrete priors.
//! * [`mechanism`]: the prior-scaled randomized-response channel, sampling and
//!   output marginals.
//! * [`feasibility`]: closed-form thresholds, minimal `delta`, valid `epsilon`
//!   regions and tradeoff curves.
//! * [`grouping`]: merging the smallest-prior symbols to raise the minimum
//!   prior mass, and choosing how many to merge.
//! * [`auditor`]: brute-force evaluation of the privacy inequalities for an
//!   arbitrary channel and prior.
//! * [`io`] and [`cli`]: file formats and the `lip-rr` command line.

pub mod auditor;
pub mod cli;
pub mod error;
pub mod feasibility;
pub mod grouping;
pub mod io;
pub mod mechanism;
pub mod pmf;
pub mod rng;

pub use auditor::{audit_mechanism, exact_min_delta, min_epsilon_empirical, AuditReport, Side};
pub use error::{LipError, Result};
pub use feasibility::{
    delta_bound, epsilon_range, infeasible_region_boundary, min_epsilon_pure, pmin_threshold,
    tradeoff_curve, EpsilonRegion, GapBoundary, Interval, RegionCase, TradeoffPoint,
};
pub use grouping::{group_plan, min_ell, GroupingPlan};
pub use mechanism::{
    build_channel, output_marginal, release, truthfulness, Channel, PrivacyParams,
};
pub use pmf::{Pmf, Symbol, ZeroPolicy};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::pmf::{Pmf, ZeroPolicy};

    pub fn example_prior() -> Pmf {
        Pmf::new(
            [("1", 0.05), ("2", 0.05), ("3", 0.2), ("4", 0.3), ("5", 0.4)],
            ZeroPolicy::Reject,
        )
        .unwrap()
    }

    pub fn labeled_pmf(weights: &[f64]) -> Pmf {
        Pmf::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| (format!("s{i}"), w)),
            ZeroPolicy::Reject,
        )
        .unwrap()
    }
}
