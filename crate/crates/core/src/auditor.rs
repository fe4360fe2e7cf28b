//! Direct evaluation of the `(epsilon, delta)`-LIP inequalities.
//!
//! For every conditioning input `x` and output event `S`, the definition asks
//!
//! ```text
//! P(Y in S) >= e^-eps P(Y in S | x) - delta      (lower side)
//! P(Y in S) <= e^eps  P(Y in S | x) + delta      (upper side)
//! ```
//!
//! Both sides are additive over outputs, so the worst event for a given `x`
//! collects exactly the outputs with a positive per-cell excess, and the
//! smallest feasible `delta` is the larger positive-part sum. Conditioning on
//! a set of inputs yields a mixture of rows, which can never exceed the worst
//! single input, so singleton inputs suffice.

use serde::Serialize;

use crate::error::Result;
use crate::grouping::GroupingPlan;
use crate::mechanism::{build_channel, check_delta, check_epsilon, Channel};
use crate::pmf::{Pmf, Symbol};

/// Slack applied to the pass/fail comparison.
pub const AUDIT_TOL: f64 = 1e-9;

/// Which inequality is binding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub epsilon: f64,
    pub delta: f64,
    pub exact_min_delta: f64,
    pub pass: bool,
    /// `None` when no inequality is violated.
    pub worst_input: Option<Symbol>,
    pub worst_event: Vec<Symbol>,
    pub worst_side: Option<Side>,
}

/// Per-cell excess `(lower, upper)` before taking positive parts:
/// `e^-eps q(y|x) - P(y)` and `P(y) - e^eps q(y|x)`.
pub fn cell_excess(channel: &Channel, prior: &Pmf, epsilon: f64) -> Result<Vec<Vec<(f64, f64)>>> {
    check_epsilon(epsilon)?;
    let marginal = channel.marginal_masses(prior)?;
    let (down, up) = ((-epsilon).exp(), epsilon.exp());
    Ok(channel
        .rows()
        .map(|row| {
            row.iter()
                .zip(&marginal)
                .map(|(&q, &py)| (down * q - py, py - up * q))
                .collect()
        })
        .collect())
}

/// Smallest `delta` making the channel `(epsilon, delta)`-LIP under `prior`,
/// with the violating input and event. `pass` is evaluated at `delta = 0`.
pub fn exact_min_delta(channel: &Channel, prior: &Pmf, epsilon: f64) -> Result<AuditReport> {
    audit_channel(channel, prior, epsilon, 0.0)
}

/// Audits `channel` at `(epsilon, delta)`.
pub fn audit_channel(
    channel: &Channel,
    prior: &Pmf,
    epsilon: f64,
    delta: f64,
) -> Result<AuditReport> {
    check_delta(delta)?;
    let cells = cell_excess(channel, prior, epsilon)?;
    let mut best = 0.0;
    let mut worst: Option<(usize, Side)> = None;
    for (x, row) in cells.iter().enumerate() {
        let lower: f64 = row.iter().map(|c| c.0.max(0.0)).sum();
        let upper: f64 = row.iter().map(|c| c.1.max(0.0)).sum();
        // strict comparisons keep the first input and the lower side on ties
        let (value, side) = if upper > lower {
            (upper, Side::Upper)
        } else {
            (lower, Side::Lower)
        };
        if value > best {
            best = value;
            worst = Some((x, side));
        }
    }
    let (worst_input, worst_event, worst_side) = match worst {
        None => (None, Vec::new(), None),
        Some((x, side)) => {
            let event = cells[x]
                .iter()
                .zip(channel.outputs())
                .filter(|(c, _)| match side {
                    Side::Lower => c.0 > 0.0,
                    Side::Upper => c.1 > 0.0,
                })
                .map(|(_, y)| y.clone())
                .collect();
            (Some(channel.inputs()[x].clone()), event, Some(side))
        }
    };
    Ok(AuditReport {
        epsilon,
        delta,
        exact_min_delta: best,
        pass: best <= delta + AUDIT_TOL,
        worst_input,
        worst_event,
        worst_side,
    })
}

/// Smallest `epsilon` at which the channel is `(epsilon, 0)`-LIP: the largest
/// `|ln(P(y) / q(y|x))|` over all cells. Cells with `q = P(y) = 0` count as
/// ratio 1; a zero on only one side makes the result infinite.
pub fn min_epsilon_empirical(channel: &Channel, prior: &Pmf) -> Result<f64> {
    let marginal = channel.marginal_masses(prior)?;
    let mut worst: f64 = 0.0;
    for row in channel.rows() {
        for (&q, &py) in row.iter().zip(&marginal) {
            let cell = match (q > 0.0, py > 0.0) {
                (false, false) => 0.0,
                (true, true) => (py / q).ln().abs(),
                _ => f64::INFINITY,
            };
            worst = worst.max(cell);
        }
    }
    Ok(worst)
}

/// Builds the randomized-response channel for `prior` at `epsilon` and
/// audits it at `(epsilon, delta)`.
pub fn audit_mechanism(prior: &Pmf, epsilon: f64, delta: f64) -> Result<AuditReport> {
    let channel = build_channel(prior, epsilon)?;
    audit_channel(&channel, prior, epsilon, delta)
}

/// Audits a grouped mechanism over its reduced alphabet.
pub fn audit_plan(plan: &GroupingPlan, epsilon: f64, delta: f64) -> Result<AuditReport> {
    let channel = plan.reduced_channel(epsilon)?;
    audit_channel(&channel, plan.reduced(), epsilon, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::delta_bound;
    use crate::grouping::group_plan;
    use crate::pmf::ZeroPolicy;
    use crate::testutil::{example_prior, labeled_pmf};
    use proptest::prelude::*;

    /// Enumerates every nonempty input set and output event and evaluates
    /// both inequalities directly.
    #[allow(clippy::needless_range_loop)]
    fn brute_force_min_delta(channel: &Channel, prior: &Pmf, epsilon: f64) -> f64 {
        let n = channel.n_inputs();
        let m = channel.n_outputs();
        let px: Vec<f64> = channel
            .inputs()
            .iter()
            .map(|x| prior.prob(x.as_str()).unwrap())
            .collect();
        let mut py = vec![0.0; m];
        for x in 0..n {
            for y in 0..m {
                py[y] += px[x] * channel.get(x, y);
            }
        }
        let mut worst: f64 = 0.0;
        for xs in 1u32..(1 << n) {
            let mass: f64 = (0..n).filter(|i| xs >> i & 1 == 1).map(|i| px[i]).sum();
            for ys in 1u32..(1 << m) {
                let out = |y: usize| ys >> y & 1 == 1;
                let p_s: f64 = (0..m).filter(|&y| out(y)).map(|y| py[y]).sum();
                let joint: f64 = (0..n)
                    .filter(|i| xs >> i & 1 == 1)
                    .map(|i| {
                        px[i]
                            * (0..m)
                                .filter(|&y| out(y))
                                .map(|y| channel.get(i, y))
                                .sum::<f64>()
                    })
                    .sum();
                let cond = joint / mass;
                worst = worst
                    .max((-epsilon).exp() * cond - p_s)
                    .max(p_s - epsilon.exp() * cond);
            }
        }
        worst
    }

    #[test]
    fn example_prior_at_threshold() {
        let p = example_prior();
        let eps = 19f64.ln();
        let c = build_channel(&p, eps).unwrap();
        let r = exact_min_delta(&c, &p, eps).unwrap();
        assert!(r.exact_min_delta < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn example_prior_below_threshold() {
        let p = example_prior();
        for eps in [0.3, 1.0, 2.0, 2.9] {
            let c = build_channel(&p, eps).unwrap();
            let r = exact_min_delta(&c, &p, eps).unwrap();
            assert!((r.exact_min_delta - delta_bound(0.05, eps).unwrap()).abs() < 1e-9);
            assert!((r.exact_min_delta - brute_force_min_delta(&c, &p, eps)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_channel_uniform_binary() {
        let p = Pmf::new([("a", 0.5), ("b", 0.5)], ZeroPolicy::Reject).unwrap();
        let id = Channel::identity(p.symbols()).unwrap();
        let r = exact_min_delta(&id, &p, 0.0).unwrap();
        assert!((r.exact_min_delta - 0.5).abs() < 1e-15);
        assert_eq!(r.worst_input.unwrap().as_str(), "a");
        assert_eq!(r.worst_side, Some(Side::Lower));
        assert_eq!(r.worst_event.len(), 1);
        assert_eq!(r.worst_event[0].as_str(), "a");
        assert!(!r.pass);
        assert!((brute_force_min_delta(&id, &p, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empirical_epsilon() {
        let p = example_prior();
        let c0 = build_channel(&p, 0.0).unwrap();
        assert!(min_epsilon_empirical(&c0, &p).unwrap() < 1e-12);
        let id = Channel::identity(p.symbols()).unwrap();
        assert_eq!(min_epsilon_empirical(&id, &p).unwrap(), f64::INFINITY);
        for eps0 in [19f64.ln(), 3.5, 6.0] {
            let c = build_channel(&p, eps0).unwrap();
            let got = min_epsilon_empirical(&c, &p).unwrap();
            // the p_min diagonal cell: ratio p e^eps / (e^eps - 1 + p)
            let diag = (0.05 * eps0.exp() / (eps0.exp() - 1.0 + 0.05)).ln().abs();
            assert!(got <= eps0 + 1e-12 && got >= diag - 1e-12);
            assert!(exact_min_delta(&c, &p, got).unwrap().exact_min_delta < 1e-12);
        }
    }

    #[test]
    fn audit_mechanism_examples() {
        let p = example_prior();
        assert!(
            audit_mechanism(&p, 2.944_438_979_166_441, 0.0)
                .unwrap()
                .pass
        );
        let r = audit_mechanism(&p, 2.0, 0.0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.worst_input.as_ref().unwrap().as_str(), "1");
        assert_eq!(r.worst_side, Some(Side::Lower));
        assert_eq!(r.worst_event, vec![Symbol::new("1").unwrap()]);
        assert!((r.exact_min_delta - 0.067_935_426_292_315_22).abs() < 1e-12);
        // the published 2.75 rounds the exact branch start 2.7508..; 2.75 itself is just short
        assert!(
            audit_mechanism(&p, 2.750_809_148_096_691, 0.01)
                .unwrap()
                .pass
        );
        assert!(!audit_mechanism(&p, 2.75, 0.01).unwrap().pass);
        assert!(audit_mechanism(&p, 1.0, 1.5).is_err());
    }

    #[test]
    fn grouped_audit_views_agree() {
        let p = example_prior();
        for ell in 1..5 {
            let plan = group_plan(&p, ell).unwrap();
            for eps in [0.2, 0.78, 1.5, 3.0] {
                let reduced = audit_plan(&plan, eps, 0.0).unwrap();
                let on_original =
                    exact_min_delta(&plan.grouped_channel(eps).unwrap(), &p, eps).unwrap();
                assert!((reduced.exact_min_delta - on_original.exact_min_delta).abs() < 1e-12);
                assert!(
                    (reduced.exact_min_delta - plan.delta_bound_grouped(eps).unwrap()).abs() < 1e-9
                );
            }
        }
    }

    fn prior_strategy(max: usize) -> impl Strategy<Value = Pmf> {
        prop::collection::vec(1e-3f64..1.0, 2..=max).prop_map(|w| labeled_pmf(&w))
    }

    fn channel_strategy() -> impl Strategy<Value = (Pmf, Channel)> {
        (2usize..5, 2usize..5).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(1e-3f64..1.0, n),
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), n),
            )
                .prop_map(move |(w, rows)| {
                    let prior = labeled_pmf(&w);
                    let outputs: Vec<Symbol> = (0..m)
                        .map(|j| Symbol::new(format!("o{j}")).unwrap())
                        .collect();
                    let rows = rows
                        .into_iter()
                        .map(|r| {
                            let r: Vec<f64> = r.into_iter().map(|v| v + 1e-3).collect();
                            let s: f64 = r.iter().sum();
                            r.into_iter().map(|v| v / s).collect()
                        })
                        .collect();
                    let channel = Channel::new(prior.symbols().to_vec(), outputs, rows).unwrap();
                    (prior, channel)
                })
        })
    }

    proptest! {
        #[test]
        fn matches_set_enumeration((prior, channel) in channel_strategy(), eps in 0.0f64..3.0) {
            let fast = exact_min_delta(&channel, &prior, eps).unwrap().exact_min_delta;
            let slow = brute_force_min_delta(&channel, &prior, eps).max(0.0);
            prop_assert!((fast - slow).abs() <= 1e-12);
        }

        #[test]
        fn report_invariants((prior, channel) in channel_strategy(), eps in 0.0f64..3.0) {
            let r = exact_min_delta(&channel, &prior, eps).unwrap();
            prop_assert!(r.exact_min_delta >= 0.0);
            if r.exact_min_delta > 0.0 {
                prop_assert!(!r.worst_event.is_empty());
            }
        }

        #[test]
        fn nonincreasing_in_epsilon((prior, channel) in channel_strategy(), a in 0.0f64..4.0, b in 0.0f64..2.0) {
            let lo = exact_min_delta(&channel, &prior, a).unwrap().exact_min_delta;
            let hi = exact_min_delta(&channel, &prior, a + b).unwrap().exact_min_delta;
            prop_assert!(hi <= lo + 1e-12);
        }

        #[test]
        fn off_diagonal_cells_never_violate(p in prior_strategy(12), eps in 0.0f64..6.0) {
            let c = build_channel(&p, eps).unwrap();
            let cells = cell_excess(&c, &p, eps).unwrap();
            for (x, row) in cells.iter().enumerate() {
                for (y, &(lower, upper)) in row.iter().enumerate() {
                    prop_assert!(upper <= 1e-15, "upper excess {} at ({}, {})", upper, x, y);
                    if x != y {
                        prop_assert!(lower <= 1e-15);
                    }
                }
            }
        }
    }
}
