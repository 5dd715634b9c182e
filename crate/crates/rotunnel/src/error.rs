use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {field}: {reason}")]
    Domain { field: String, reason: String },
    /// A numerical procedure failed to meet its tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn domain(field: &str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
