use thiserror::Error;

/// Errors raised while building or evaluating a contest model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model input failed validation. `field` is a dotted path into the
    /// configuration (e.g. `c.values[3]`).
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    /// A requested cutoff cannot be induced by the admissible mechanisms.
    #[error("cutoff {s} is not in the feasible set")]
    Infeasible { s: f64 },

    /// A numerical routine could not produce a trustworthy result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
