use thiserror::Error;

/// Errors raised by the relay secrecy routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the formula being evaluated.
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    /// A rational SNDR form has a vanishing (or negative) denominator term.
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    /// High-SNR quantities (theta, ceilings, thresholds) need tau2 > 0.
    #[error("asymptotic quantities undefined for perfect hardware (tau2 = 0)")]
    AsymptoticUndefined,

    /// DL simplified coefficients need k_R_r > 0 (xi1 > 1).
    #[error("DL link coefficients undefined: xi1 = 1 (k_R_r = 0)")]
    DlCoefficientsUndefined,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("hardware design violates its budget: {0}")]
    BudgetViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        what,
        detail: detail.into(),
    }
}
