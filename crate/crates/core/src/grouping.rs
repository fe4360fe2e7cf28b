//! Merging the smallest-prior symbols into one output symbol.
//!
//! Raising the minimum prior mass lowers the smallest `epsilon` the
//! randomized-response channel can support. A plan sorts the alphabet by
//! prior mass, merges the `ell` lightest symbols into a fresh symbol, and
//! runs the randomized response over the reduced alphabet.

use crate::error::{LipError, Result};
use crate::feasibility::{delta_bound, pmin_threshold};
use crate::mechanism::{build_channel, check_delta, check_epsilon, truthfulness_mapped, Channel};
use crate::pmf::{Pmf, Symbol};

/// Separator used to synthesize the merged symbol's label.
pub const GROUP_LABEL_SEPARATOR: &str = "+";

/// Slack used when comparing a grouped minimum mass against its threshold.
const THRESHOLD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupingPlan {
    original: Pmf,
    ell: usize,
    grouped: Symbol,
    members: Vec<Symbol>,
    /// Alphabet `[grouped, survivors in ascending-mass order]`.
    reduced: Pmf,
    /// Image in `reduced` of each original atom, in original order.
    image: Vec<usize>,
}

/// Merges the `ell` smallest-prior atoms of `pmf` into one symbol.
///
/// `ell = 1` keeps every probability; `ell = pmf.len()` produces a
/// degenerate single-atom plan.
pub fn group_plan(pmf: &Pmf, ell: usize) -> Result<GroupingPlan> {
    let n = pmf.len();
    if ell < 1 || ell > n {
        return Err(LipError::EllOutOfRange { ell, max: n });
    }
    let order = pmf.nondecreasing_order();
    let (merged, survivors) = order.split_at(ell);
    let members: Vec<Symbol> = merged.iter().map(|&i| pmf.symbols()[i].clone()).collect();
    let label = members
        .iter()
        .map(Symbol::as_str)
        .collect::<Vec<_>>()
        .join(GROUP_LABEL_SEPARATOR);
    if survivors
        .iter()
        .any(|&i| pmf.symbols()[i].as_str() == label)
    {
        return Err(LipError::LabelCollision(label));
    }
    let grouped = Symbol::new(label)?;

    let group_mass: f64 = merged.iter().map(|&i| pmf.probs()[i]).sum();
    let mut symbols = vec![grouped.clone()];
    let mut probs = vec![group_mass];
    let mut image = vec![0; n];
    for (k, &i) in survivors.iter().enumerate() {
        symbols.push(pmf.symbols()[i].clone());
        probs.push(pmf.probs()[i]);
        image[i] = k + 1;
    }
    let reduced = Pmf::from_parts(symbols, probs)?;
    Ok(GroupingPlan {
        original: pmf.clone(),
        ell,
        grouped,
        members,
        reduced,
        image,
    })
}

impl GroupingPlan {
    pub fn original(&self) -> &Pmf {
        &self.original
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn grouped_symbol(&self) -> &Symbol {
        &self.grouped
    }

    /// The merged symbols, lightest first.
    pub fn members(&self) -> &[Symbol] {
        &self.members
    }

    pub fn reduced(&self) -> &Pmf {
        &self.reduced
    }

    /// Whether the whole alphabet was merged (constant output).
    pub fn is_degenerate(&self) -> bool {
        self.reduced.is_degenerate()
    }

    /// Image of an original symbol in the reduced alphabet.
    pub fn map(&self, x: &str) -> Option<&Symbol> {
        self.original
            .index_of(x)
            .map(|i| &self.reduced.symbols()[self.image[i]])
    }

    /// `(original, image)` pairs in original-alphabet order.
    pub fn map_table(&self) -> impl Iterator<Item = (&Symbol, &Symbol)> + '_ {
        self.original
            .symbols()
            .iter()
            .zip(&self.image)
            .map(|(x, &k)| (x, &self.reduced.symbols()[k]))
    }

    /// The deterministic channel sending each original symbol to its image.
    pub fn map_channel(&self) -> Channel {
        let m = self.reduced.len();
        let rows = self
            .image
            .iter()
            .map(|&k| (0..m).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Channel::new(
            self.original.symbols().to_vec(),
            self.reduced.symbols().to_vec(),
            rows,
        )
        .expect("a 0/1 map matrix is a valid channel")
    }

    /// Minimum mass of the reduced prior: the smaller of the merged symbol
    /// and the lightest survivor.
    pub fn p_min_grouped(&self) -> Result<f64> {
        if self.is_degenerate() {
            return Err(LipError::DegeneratePlan);
        }
        let probs = self.reduced.probs();
        let value = probs[0].min(probs[1]);
        debug_assert_eq!(value, self.reduced.p_min());
        Ok(value)
    }

    /// Channel from the original alphabet to the reduced one.
    ///
    /// Inputs in the merged group release the merged symbol with
    /// probability `1 - (1 - P'(g)) e^-eps`; any other output `y` is released
    /// with probability `P'(y) e^-eps`. Survivors behave likewise with their
    /// own reduced mass.
    pub fn grouped_channel(&self, epsilon: f64) -> Result<Channel> {
        check_epsilon(epsilon)?;
        if self.is_degenerate() {
            return Err(LipError::DegeneratePlan);
        }
        let scale = (-epsilon).exp();
        let reduced = self.reduced.probs();
        let rows = self
            .image
            .iter()
            .map(|&k| {
                reduced
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| {
                        if j == k {
                            1.0 - (1.0 - p) * scale
                        } else {
                            p * scale
                        }
                    })
                    .collect()
            })
            .collect();
        Channel::new(
            self.original.symbols().to_vec(),
            self.reduced.symbols().to_vec(),
            rows,
        )
    }

    /// Randomized response over the reduced alphabet alone.
    pub fn reduced_channel(&self, epsilon: f64) -> Result<Channel> {
        if self.is_degenerate() {
            return Err(LipError::DegeneratePlan);
        }
        build_channel(&self.reduced, epsilon)
    }

    /// Minimal `delta` of the grouped mechanism at `epsilon`.
    pub fn delta_bound_grouped(&self, epsilon: f64) -> Result<f64> {
        delta_bound(self.p_min_grouped()?, epsilon)
    }

    /// Probability that the grouped mechanism releases the image of its input.
    pub fn truthfulness(&self, epsilon: f64) -> Result<f64> {
        let channel = self.grouped_channel(epsilon)?;
        truthfulness_mapped(&channel, &self.original, |x| self.map(x.as_str()).cloned())
    }
}

/// Free-function form of [`GroupingPlan::p_min_grouped`].
pub fn p_min_grouped(plan: &GroupingPlan) -> Result<f64> {
    plan.p_min_grouped()
}

/// Free-function form of [`GroupingPlan::grouped_channel`].
pub fn grouped_channel(plan: &GroupingPlan, epsilon: f64) -> Result<Channel> {
    plan.grouped_channel(epsilon)
}

/// Free-function form of [`GroupingPlan::delta_bound_grouped`].
pub fn delta_bound_grouped(plan: &GroupingPlan, epsilon: f64) -> Result<f64> {
    plan.delta_bound_grouped(epsilon)
}

/// Smallest `ell` in `[1, |X| - 1]` whose grouped prior meets the minimum
/// mass threshold for `(epsilon, delta)`, or `None` if no non-degenerate
/// plan does.
pub fn min_ell(pmf: &Pmf, epsilon: f64, delta: f64) -> Result<Option<usize>> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    let threshold = pmin_threshold(epsilon, delta)?;
    for ell in 1..pmf.len() {
        let plan = group_plan(pmf, ell)?;
        if plan.p_min_grouped()? >= threshold - THRESHOLD_TOL {
            return Ok(Some(ell));
        }
    }
    Ok(None)
}
