//! The context-aware randomized-response channel.
//!
//! For a prior `P` and privacy level `epsilon`, input `x` is released as
//! `y != x` with probability `P(y) * exp(-epsilon)` and kept with the
//! remaining mass `1 - (1 - P(x)) * exp(-epsilon)`. The output marginal of
//! this channel equals the prior.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};
use crate::pmf::{Pmf, Symbol};
use crate::rng;

/// Row-sum tolerance for channels.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Slack allowed outside `[0, 1]` before an entry is rejected.
pub const ENTRY_TOL: f64 = 1e-12;

/// A privacy level `(epsilon, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_delta(delta)?;
        Ok(PrivacyParams { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(LipError::domain("epsilon", epsilon, "[0, inf)"))
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(LipError::domain("delta", delta, "[0, 1]"))
    }
}

/// A row-stochastic conditional distribution `P(Y | X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    inputs: Vec<Symbol>,
    outputs: Vec<Symbol>,
    /// Row-major, `inputs.len() * outputs.len()`.
    entries: Vec<f64>,
}

impl Channel {
    /// Validates and builds a channel from explicit rows.
    ///
    /// Entries within [`ENTRY_TOL`] outside `[0, 1]` are clamped.
    pub fn new(inputs: Vec<Symbol>, outputs: Vec<Symbol>, rows: Vec<Vec<f64>>) -> Result<Self> {
        ensure_unique(&inputs, "input")?;
        ensure_unique(&outputs, "output")?;
        if inputs.is_empty() || outputs.is_empty() {
            return Err(LipError::InvalidChannel("empty alphabet".into()));
        }
        if rows.len() != inputs.len() {
            return Err(LipError::InvalidChannel(format!(
                "{} rows for {} inputs",
                rows.len(),
                inputs.len()
            )));
        }
        let mut entries = Vec::with_capacity(inputs.len() * outputs.len());
        for (x, row) in inputs.iter().zip(rows) {
            if row.len() != outputs.len() {
                return Err(LipError::InvalidChannel(format!(
                    "row `{x}` has {} entries, expected {}",
                    row.len(),
                    outputs.len()
                )));
            }
            let mut sum = 0.0;
            for q in row {
                if !q.is_finite() || !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&q) {
                    return Err(LipError::InvalidChannel(format!(
                        "row `{x}` has entry {q} outside [0, 1]"
                    )));
                }
                let q = q.clamp(0.0, 1.0);
                sum += q;
                entries.push(q);
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(LipError::InvalidChannel(format!("row `{x}` sums to {sum}")));
            }
        }
        Ok(Channel {
            inputs,
            outputs,
            entries,
        })
    }

    /// The channel that always releases its input unchanged.
    pub fn identity(symbols: &[Symbol]) -> Result<Self> {
        let n = symbols.len();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(symbols.to_vec(), symbols.to_vec(), rows)
    }

    pub fn inputs(&self) -> &[Symbol] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Symbol] {
        &self.outputs
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn row(&self, input: usize) -> &[f64] {
        let m = self.outputs.len();
        &self.entries[input * m..(input + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.entries.chunks(self.outputs.len())
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.entries[input * self.outputs.len() + output]
    }

    pub fn input_index(&self, label: &str) -> Option<usize> {
        self.inputs.iter().position(|s| s.as_str() == label)
    }

    pub fn output_index(&self, label: &str) -> Option<usize> {
        self.outputs.iter().position(|s| s.as_str() == label)
    }

    /// Runs `self` then `next`: entry `(x, z)` is `sum_y self(y|x) next(z|y)`.
    pub fn compose(&self, next: &Channel) -> Result<Channel> {
        if self.outputs != next.inputs {
            return Err(LipError::AlphabetMismatch(
                "outputs of the first channel differ from inputs of the second".into(),
            ));
        }
        let m = next.outputs.len();
        let mut entries = vec![0.0; self.inputs.len() * m];
        for (x, row) in self.rows().enumerate() {
            let out = &mut entries[x * m..(x + 1) * m];
            for (y, &q) in row.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                for (o, r) in out.iter_mut().zip(next.row(y)) {
                    *o += q * r;
                }
            }
        }
        Ok(Channel {
            inputs: self.inputs.clone(),
            outputs: next.outputs.clone(),
            entries,
        })
    }

    /// Largest absolute entry-wise difference, or `None` if the alphabets differ.
    pub fn max_abs_diff(&self, other: &Channel) -> Option<f64> {
        if self.inputs != other.inputs || self.outputs != other.outputs {
            return None;
        }
        Some(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Prior probability of each channel input, looked up by label.
    pub(crate) fn aligned_prior(&self, prior: &Pmf) -> Result<Vec<f64>> {
        if prior.len() != self.inputs.len() {
            return Err(LipError::AlphabetMismatch(format!(
                "channel has {} inputs, prior has {} atoms",
                self.inputs.len(),
                prior.len()
            )));
        }
        self.inputs
            .iter()
            .map(|x| {
                prior.prob(x.as_str()).ok_or_else(|| {
                    LipError::AlphabetMismatch(format!("input `{x}` missing from prior"))
                })
            })
            .collect()
    }

    /// Output masses `sum_x P(x) q(y|x)` in output-alphabet order.
    pub(crate) fn marginal_masses(&self, prior: &Pmf) -> Result<Vec<f64>> {
        let weights = self.aligned_prior(prior)?;
        let mut masses = vec![0.0; self.outputs.len()];
        for (w, row) in weights.iter().zip(self.rows()) {
            for (m, q) in masses.iter_mut().zip(row) {
                *m += w * q;
            }
        }
        Ok(masses)
    }
}

fn ensure_unique(symbols: &[Symbol], which: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(symbols.len());
    for s in symbols {
        if !seen.insert(s) {
            return Err(LipError::InvalidChannel(format!(
                "duplicate {which} label `{s}`"
            )));
        }
    }
    Ok(())
}

/// Builds the context-aware randomized-response channel for `pmf` at `epsilon`.
///
/// Diagonal entries are taken as one minus the off-diagonal row mass so
/// every row sums to one.
pub fn build_channel(pmf: &Pmf, epsilon: f64) -> Result<Channel> {
    check_epsilon(epsilon)?;
    let scale = (-epsilon).exp();
    let n = pmf.len();
    let probs = pmf.probs();
    let mut entries = Vec::with_capacity(n * n);
    for x in 0..n {
        let start = entries.len();
        let mut off_mass = 0.0;
        for (y, &p) in probs.iter().enumerate() {
            let q = if x == y { 0.0 } else { p * scale };
            off_mass += q;
            entries.push(q);
        }
        let diag = 1.0 - off_mass;
        debug_assert!((diag - (1.0 - (1.0 - probs[x]) * scale)).abs() <= 1e-12);
        entries[start + x] = diag;
    }
    Ok(Channel {
        inputs: pmf.symbols().to_vec(),
        outputs: pmf.symbols().to_vec(),
        entries,
    })
}

/// Distribution of the channel output when the input follows `pmf`.
///
/// Fails if some output symbol receives no mass, since a [`Pmf`] has
/// strictly positive atoms.
pub fn output_marginal(channel: &Channel, pmf: &Pmf) -> Result<Pmf> {
    let masses = channel.marginal_masses(pmf)?;
    if let Some(j) = masses.iter().position(|&m| m <= 0.0) {
        return Err(LipError::InvalidChannel(format!(
            "output `{}` has zero marginal mass",
            channel.outputs[j]
        )));
    }
    Pmf::from_parts(channel.outputs.clone(), masses)
}

/// Samples one output for input `x`, deterministically in `(seed, draw_index)`.
pub fn release(channel: &Channel, x: &str, seed: u64, draw_index: u64) -> Result<Symbol> {
    let i = channel
        .input_index(x)
        .ok_or_else(|| LipError::UnknownSymbol(x.to_owned()))?;
    let j = release_index(channel, i, seed, draw_index);
    Ok(channel.outputs[j].clone())
}

pub(crate) fn release_index(channel: &Channel, input: usize, seed: u64, draw_index: u64) -> usize {
    rng::inverse_cdf(channel.row(input), rng::draw_uniform(seed, draw_index))
}

/// Probability that a square channel releases its input unchanged.
///
/// A utility proxy: `sum_x P(x) q(x|x)`.
pub fn truthfulness(channel: &Channel, pmf: &Pmf) -> Result<f64> {
    truthfulness_mapped(channel, pmf, |x| Some(x.clone()))
}

/// Probability that the output equals `image(X)`; for grouped channels
/// `image` is the grouping map.
pub fn truthfulness_mapped<F>(channel: &Channel, pmf: &Pmf, image: F) -> Result<f64>
where
    F: Fn(&Symbol) -> Option<Symbol>,
{
    let weights = channel.aligned_prior(pmf)?;
    let mut total = 0.0;
    for (i, (x, w)) in channel.inputs.iter().zip(weights).enumerate() {
        let target = image(x)
            .ok_or_else(|| LipError::AlphabetMismatch(format!("no image for input `{x}`")))?;
        let j = channel.output_index(target.as_str()).ok_or_else(|| {
            LipError::AlphabetMismatch(format!("`{target}` is not an output symbol"))
        })?;
        total += w * channel.get(i, j);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::ZeroPolicy;
    use crate::testutil::{example_prior, labeled_pmf};
    use proptest::prelude::*;

    fn sym(s: &str) -> Symbol {
        Symbol::new(s).unwrap()
    }

    #[test]
    fn example_prior_at_log19() {
        let p = example_prior();
        let c = build_channel(&p, 19f64.ln()).unwrap();
        assert!((c.get(0, 0) - 0.95).abs() < 1e-12);
        // 0.4 / 19
        assert!((c.get(0, 4) - 0.021_052_631_578_947_37).abs() < 1e-12);
        for x in 0..5 {
            for y in 0..5 {
                if x != y {
                    assert!(c.get(x, x) >= c.get(x, y));
                }
            }
        }
    }

    #[test]
    fn zero_epsilon_broadcasts_prior() {
        let p = example_prior();
        let c = build_channel(&p, 0.0).unwrap();
        for row in c.rows() {
            for (q, want) in row.iter().zip(p.probs()) {
                assert!((q - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn binary_uniform_at_log3() {
        let p = Pmf::new([("a", 0.5), ("b", 0.5)], ZeroPolicy::Reject).unwrap();
        let c = build_channel(&p, 3f64.ln()).unwrap();
        assert!((c.get(0, 0) - 5.0 / 6.0).abs() < 1e-12);
        assert!((c.get(0, 1) - 1.0 / 6.0).abs() < 1e-12);
        assert!((c.get(1, 1) - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn negative_epsilon_rejected() {
        assert!(matches!(
            build_channel(&example_prior(), -0.1),
            Err(LipError::Domain {
                name: "epsilon",
                ..
            })
        ));
        assert!(build_channel(&example_prior(), f64::NAN).is_err());
    }

    #[test]
    fn privacy_params_domain() {
        assert!(PrivacyParams::new(1.0, 0.5).is_ok());
        assert!(PrivacyParams::new(-1.0, 0.5).is_err());
        assert!(PrivacyParams::new(1.0, 1.5).is_err());
        assert_eq!(PrivacyParams::pure(2.0).unwrap().delta, 0.0);
    }

    #[test]
    fn marginals() {
        let p = example_prior();
        let m = output_marginal(&build_channel(&p, 0.0).unwrap(), &p).unwrap();
        for (a, b) in m.probs().iter().zip(p.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let id = Channel::identity(p.symbols()).unwrap();
        let m = output_marginal(&id, &p).unwrap();
        assert_eq!(m.probs(), p.probs());
    }

    #[test]
    fn marginal_alphabet_mismatch() {
        let p = example_prior();
        let q = Pmf::new([("a", 0.5), ("b", 0.5)], ZeroPolicy::Reject).unwrap();
        let c = build_channel(&q, 1.0).unwrap();
        assert!(matches!(
            output_marginal(&c, &p),
            Err(LipError::AlphabetMismatch(_))
        ));
        let r = Pmf::new([("a", 0.5), ("z", 0.5)], ZeroPolicy::Reject).unwrap();
        assert!(matches!(
            output_marginal(&c, &r),
            Err(LipError::AlphabetMismatch(_))
        ));
    }

    #[test]
    fn channel_validation() {
        let ab = vec![sym("a"), sym("b")];
        assert!(
            Channel::new(ab.clone(), ab.clone(), vec![vec![0.5, 0.5], vec![0.2, 0.7]]).is_err()
        );
        assert!(Channel::new(
            ab.clone(),
            ab.clone(),
            vec![vec![1.5, -0.5], vec![0.5, 0.5]]
        )
        .is_err());
        assert!(Channel::new(ab.clone(), ab.clone(), vec![vec![1.0, 0.0]]).is_err());
        assert!(Channel::new(
            vec![sym("a"), sym("a")],
            ab.clone(),
            vec![vec![1.0, 0.0]; 2]
        )
        .is_err());
        let c = Channel::new(
            ab.clone(),
            ab,
            vec![vec![1.0 + 5e-13, -5e-13], vec![0.5, 0.5]],
        )
        .unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 0.0);
    }

    #[test]
    fn release_is_deterministic() {
        let p = example_prior();
        let id = Channel::identity(p.symbols()).unwrap();
        for i in 0..1000 {
            assert_eq!(release(&id, "3", 9, i).unwrap().as_str(), "3");
        }
        let c = build_channel(&p, 1.0).unwrap();
        for i in 0..100 {
            assert_eq!(
                release(&c, "2", 123, i).unwrap(),
                release(&c, "2", 123, i).unwrap()
            );
        }
        assert_eq!(
            release(&c, "nope", 0, 0),
            Err(LipError::UnknownSymbol("nope".into()))
        );
    }

    #[test]
    fn release_at_zero_epsilon_follows_prior() {
        let p = example_prior();
        let c = build_channel(&p, 0.0).unwrap();
        let n = 1_000_000u64;
        let mut counts = [0u64; 5];
        for i in 0..n {
            counts[release_index(&c, 0, 2024, i)] += 1;
        }
        for (k, &pk) in counts.iter().zip(p.probs()) {
            let sd = (n as f64 * pk * (1.0 - pk)).sqrt();
            assert!((*k as f64 - n as f64 * pk).abs() <= 3.0 * sd);
        }
    }

    #[test]
    fn release_rows_pass_chi_square() {
        let p = example_prior();
        let c = build_channel(&p, 1.3).unwrap();
        let n = 100_000u64;
        // chi-square(4) upper 1e-3 quantile (scipy.stats.chi2.ppf)
        let critical = 18.466_826_952_903_16;
        for x in 0..c.n_inputs() {
            let mut counts = [0u64; 5];
            for i in 0..n {
                counts[release_index(&c, x, 77 + x as u64, i)] += 1;
            }
            let stat: f64 = counts
                .iter()
                .zip(c.row(x))
                .map(|(&k, &q)| {
                    let e = n as f64 * q;
                    (k as f64 - e).powi(2) / e
                })
                .sum();
            assert!(stat < critical, "row {x}: chi2 {stat} >= {critical}");
        }
    }

    #[test]
    fn truthfulness_cases() {
        let p = example_prior();
        let id = Channel::identity(p.symbols()).unwrap();
        assert!((truthfulness(&id, &p).unwrap() - 1.0).abs() < 1e-15);

        let c0 = build_channel(&p, 0.0).unwrap();
        let sq: f64 = p.probs().iter().map(|x| x * x).sum();
        assert!((truthfulness(&c0, &p).unwrap() - sq).abs() < 1e-15);

        let c = build_channel(&p, 19f64.ln()).unwrap();
        // sum_x p(x)(1 - (1 - p(x))/19), frozen from a 40-digit evaluation
        assert!((truthfulness(&c, &p).unwrap() - 0.962_894_736_842_105_3).abs() < 1e-12);
    }

    fn prior_strategy() -> impl Strategy<Value = Pmf> {
        prop::collection::vec(1e-3f64..1.0, 2..13).prop_map(|w| labeled_pmf(&w))
    }

    proptest! {
        #[test]
        fn channels_are_row_stochastic(p in prior_strategy(), eps in 0.0f64..12.0) {
            let c = build_channel(&p, eps).unwrap();
            for (x, row) in c.rows().enumerate() {
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                for &q in row {
                    prop_assert!((0.0..=1.0).contains(&q));
                }
                let closed = 1.0 - (1.0 - p.probs()[x]) * (-eps).exp();
                prop_assert!((row[x] - closed).abs() <= 1e-12);
            }
        }

        #[test]
        fn marginal_is_preserved(p in prior_strategy(), eps in 0.0f64..12.0) {
            let c = build_channel(&p, eps).unwrap();
            let m = output_marginal(&c, &p).unwrap();
            for (a, b) in m.probs().iter().zip(p.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn truthfulness_grows_with_epsilon(p in prior_strategy(), lo in 0.0f64..8.0, step in 0.0f64..4.0) {
            let t_lo = truthfulness(&build_channel(&p, lo).unwrap(), &p).unwrap();
            let t_hi = truthfulness(&build_channel(&p, lo + step).unwrap(), &p).unwrap();
            prop_assert!(t_hi >= t_lo - 1e-12);
        }
    }
}
