use thiserror::Error;

use crate::geometry::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Inputs outside an operation's domain: model mismatch, bad weights,
    /// out-of-range parameters, empty samples.
    #[error("domain error: {0}")]
    Domain(String),

    /// A hyperboloid point off the Minkowski constraint surface, or a point
    /// with non-finite or negative coordinates where they are not allowed.
    #[error("invalid point: {0}")]
    InvalidPoint(String),

    /// Cyclic alternating projection ran out of sweeps.
    #[error("alternating projection did not converge after {sweeps} sweeps (last displacement {displacement:e})")]
    Convergence {
        last: Box<Point>,
        displacement: f64,
        sweeps: usize,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
