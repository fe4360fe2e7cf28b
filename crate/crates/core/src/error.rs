use thiserror::Error;

/// Errors raised by construction, analysis, and auditing routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LipError {
    #[error("empty symbol label")]
    EmptyLabel,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("weight for `{label}` is not a finite nonnegative number: {weight}")]
    InvalidWeight { label: String, weight: f64 },
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("atom `{0}` has zero probability (use the drop policy to remove it)")]
    ZeroAtom(String),
    #[error("a prior needs at least 2 atoms, got {0}")]
    TooFewAtoms(usize),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("ell = {ell} is outside [1, {max}]")]
    EllOutOfRange { ell: usize, max: usize },
    #[error("plan merges the whole alphabet into one symbol")]
    DegeneratePlan,
    #[error("grouped label `{0}` collides with an existing label")]
    LabelCollision(String),
}

impl LipError {
    pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Self {
        LipError::Domain {
            name,
            value,
            domain,
        }
    }
}

pub type Result<T> = std::result::Result<T, LipError>;
