use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document; `location` pins the byte offset or row.
    #[error("parse error at {location}: {detail}")]
    Parse { location: String, detail: String },

    /// A manifest with zero components.
    #[error("manifest contains no components")]
    EmptyManifest,

    /// Profile file is missing a required key or carries an unknown one.
    #[error("profile schema error: field `{0}`")]
    Schema(String),

    /// Profile file decodes but violates a value constraint.
    #[error("profile validation error: {0}")]
    Validation(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Regression input with no usable spread in the predictor.
    #[error("degenerate fit for `{0}`")]
    DegenerateFit(String),

    /// No values present for a column that a parameter needs.
    #[error("no values available for `{0}`")]
    EmptyColumn(String),

    /// Worksheet-mode prediction requires measured timings on every component.
    #[error("component {0} is missing measured first-byte/content-download times")]
    IncompleteManifest(u32),

    /// Size-mode prediction requires a fitted model the profile does not carry.
    #[error("profile has no model for `{0}`")]
    ProfileIncomplete(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
