use thiserror::Error;

/// Errors raised by the group-theoretic pipelines.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("root undefined: e_p of the identity word is not defined")]
    UndefinedRoot,

    #[error("not a homomorphism: relator `{relator}` does not act trivially")]
    NotAHomomorphism { relator: String },

    #[error("not surjective: generated subgroup has order {generated}, target has order {target}")]
    NotSurjective { generated: u64, target: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource limit: {what} requires {required}, budget is {budget}")]
    ResourceLimit {
        what: String,
        required: String,
        budget: u64,
    },

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn resource(what: impl Into<String>, required: impl ToString, budget: u64) -> Self {
        Error::ResourceLimit {
            what: what.into(),
            required: required.to_string(),
            budget,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
