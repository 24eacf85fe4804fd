use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("mapped column `{column}` (for {field}) not found in header")]
    MissingColumn { field: String, column: String },

    #[error("no valid rows after validation ({rows_read} rows read)")]
    NoValidRows { rows_read: usize },

    #[error("sample is empty after filtering{}", context_suffix(.context))]
    EmptySample { context: String },

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("age {0} is below the minimum binnable age 15")]
    AgeBelowMinimum(u32),

    #[error("reference level `{reference}` of `{variable}` is not observed in the data")]
    ReferenceUnobserved { variable: String, reference: String },

    #[error("reference level `{reference}` is not a declared level of `{variable}`")]
    ReferenceUndeclared { variable: String, reference: String },

    #[error("value `{value}` of `{variable}` is not a declared level")]
    UndeclaredLevel { variable: String, value: String },

    #[error("invalid model terms: {0}")]
    InvalidTerms(String),

    #[error("design is rank deficient (rank {rank} of {columns}); dependent columns: {}", .dependent.join(", "))]
    RankDeficient {
        rank: usize,
        columns: usize,
        dependent: Vec<String>,
    },

    #[error("no residual degrees of freedom (n = {n}, rank = {rank})")]
    NoResidualDof { n: usize, rank: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("coefficient `{0}` not present in fit")]
    MissingCoefficient(String),

    #[error("fit is not quadratic in age")]
    NotQuadratic,

    #[error("too few distinct periods for `{country}`: {periods}")]
    TooFewPeriods { country: String, periods: usize },

    #[error("curve has {0} bins; at least 2 are required")]
    TooFewBins(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed fixture: {0}")]
    Fixture(String),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
