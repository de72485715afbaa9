use thiserror::Error;

use crate::model::{Experiment, Hypothesis};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar input lies outside its admissible range.
    #[error("model: `{name}` = {value} violates constraint {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("predictors: hypothesis {hypothesis} is not defined for the {experiment} experiment")]
    UnsupportedHypothesis {
        hypothesis: Hypothesis,
        experiment: Experiment,
    },

    #[error("{context}: dimension mismatch, expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("sectors: {0}")]
    Sector(String),

    #[error("fringes: {0}")]
    Geometry(String),

    #[error("stats: counts and model use different category layouts ({counts} vs {model})")]
    CategoryMismatch {
        counts: &'static str,
        model: &'static str,
    },

    #[error("stats: models are indistinguishable (max probability difference {max_difference:e})")]
    DegenerateComparison { max_difference: f64 },

    #[error("stats: observed counts have zero probability under both models")]
    ImpossibleCounts,

    #[error("stats: required sample size exceeds the cap of {cap} particles")]
    ResourceLimit { cap: u64 },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            constraint,
        }
    }
}
