use std::fmt;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested quantity.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter failed validation; `field` names the offending input.
    #[error("invalid `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("alist parse error at line {line}: {reason}")]
    Alist { line: usize, reason: String },

    #[error("inconsistent degrees: {0}")]
    InconsistentDegree(String),

    #[error("linear program infeasible; binding grid points (i_a): {}", FmtPoints(.points))]
    Infeasible { points: Vec<f64> },

    #[error("construction failed placing bit {bit}: {reason}")]
    Construction { bit: usize, reason: String },

    #[error("code violates the symbol-separation constraint in {count} (check, symbol) pairs")]
    SymbolConstraint { count: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

struct FmtPoints<'a>(&'a [f64]);

impl fmt::Display for FmtPoints<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p:.4}")?;
        }
        Ok(())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
