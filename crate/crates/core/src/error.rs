use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside the range where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Fock truncation of the oracle is too small for the requested accuracy.
    #[error("Fock truncation dim={dim} insufficient (estimated error {estimate:.3e}); try dim={suggested}")]
    Truncation {
        dim: usize,
        suggested: usize,
        estimate: f64,
    },

    /// Gauss–Hermite rule failed its self-consistency check.
    #[error("quadrature order {order} insufficient (estimated error {estimate:.3e} > {tol:.1e})")]
    Quadrature { order: usize, estimate: f64, tol: f64 },

    /// Bisection could not bracket the requested contour level.
    #[error("no sign change: CH_max never exceeds {level:e} for eta in (0, 1] at xi={xi}, p_dark={p_dark}")]
    NoSignChange { level: f64, xi: f64, p_dark: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Checks that `value` lies in the half-open unit interval (0, 1].
pub(crate) fn check_unit(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} = {value} is outside (0, 1]")))
    }
}

pub(crate) fn check_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} = {value} is not finite")))
    }
}
