//! Validated discrete priors over finite labeled alphabets.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};

/// Maximum allowed deviation of a constructed prior's total mass from 1.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A label identifying one element of an alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(String);

impl Symbol {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(LipError::EmptyLabel);
        }
        Ok(Symbol(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Symbol {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Symbol {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// What to do with zero-weight atoms at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroPolicy {
    #[default]
    Reject,
    Drop,
}

/// A probability mass function with strictly positive atoms.
///
/// Atom order is significant: it is the alphabet order used by channels,
/// sampling and tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    symbols: Vec<Symbol>,
    probs: Vec<f64>,
    index: HashMap<Symbol, usize>,
}

impl Pmf {
    /// Builds a normalized prior from nonnegative weights.
    pub fn new<L, I>(atoms: I, zero_policy: ZeroPolicy) -> Result<Self>
    where
        L: Into<String>,
        I: IntoIterator<Item = (L, f64)>,
    {
        let mut symbols = Vec::new();
        let mut weights = Vec::new();
        let mut seen = HashMap::new();
        for (label, weight) in atoms {
            let symbol = Symbol::new(label)?;
            if seen.insert(symbol.clone(), ()).is_some() {
                return Err(LipError::DuplicateLabel(symbol.0));
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(LipError::InvalidWeight {
                    label: symbol.0,
                    weight,
                });
            }
            if weight == 0.0 {
                match zero_policy {
                    ZeroPolicy::Reject => return Err(LipError::ZeroAtom(symbol.0)),
                    ZeroPolicy::Drop => continue,
                }
            }
            symbols.push(symbol);
            weights.push(weight);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(LipError::AllZeroWeights);
        }
        if symbols.len() < 2 {
            return Err(LipError::TooFewAtoms(symbols.len()));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::from_parts(symbols, probs)
    }

    /// Assembles a prior from already-normalized parts. Single-atom priors
    /// are accepted here; they only arise from merging a whole alphabet.
    pub(crate) fn from_parts(symbols: Vec<Symbol>, probs: Vec<f64>) -> Result<Self> {
        debug_assert_eq!(symbols.len(), probs.len());
        if symbols.is_empty() {
            return Err(LipError::TooFewAtoms(0));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(LipError::DuplicateLabel(s.0.clone()));
            }
        }
        for (s, &p) in symbols.iter().zip(&probs) {
            if !(p > 0.0 && p <= 1.0 + NORMALIZATION_TOL) {
                return Err(LipError::ZeroAtom(s.0.clone()));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(LipError::NotNormalized(total));
        }
        Ok(Pmf {
            symbols,
            probs,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// True for the single-atom prior produced by a total merge.
    pub fn is_degenerate(&self) -> bool {
        self.symbols.len() < 2
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, f64)> + '_ {
        self.symbols.iter().zip(self.probs.iter().copied())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.index_of(label).map(|i| self.probs[i])
    }

    /// Smallest atom probability.
    pub fn p_min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Reorders atoms by ascending probability, keeping input order on ties.
    pub fn sort_nondecreasing(&self) -> Pmf {
        let order = self.nondecreasing_order();
        let symbols = order.iter().map(|&i| self.symbols[i].clone()).collect();
        let probs = order.iter().map(|&i| self.probs[i]).collect();
        Self::from_parts(symbols, probs).expect("permutation of a valid pmf is valid")
    }

    /// Atom indices in ascending-probability order (stable).
    pub fn nondecreasing_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.probs[a].total_cmp(&self.probs[b]));
        order
    }

    /// Whether both priors share the same alphabet in the same order.
    pub fn same_alphabet(&self, symbols: &[Symbol]) -> bool {
        self.symbols.as_slice() == symbols
    }
}

/// Free-function form of [`Pmf::p_min`].
pub fn p_min(pmf: &Pmf) -> f64 {
    pmf.p_min()
}

/// Free-function form of [`Pmf::sort_nondecreasing`].
pub fn sort_nondecreasing(pmf: &Pmf) -> Pmf {
    pmf.sort_nondecreasing()
}
