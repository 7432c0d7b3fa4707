use thiserror::Error;

use crate::model::LegKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time change is not positive: c0 - sum|terms| = {tau_min}")]
    NonPositiveTimeChange { tau_min: f64 },

    #[error("invalid time change: {0}")]
    InvalidSpec(String),

    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),

    #[error("leg parameter {u} exceeds the locality bound {bound}")]
    NonLocalLeg { u: f64, bound: f64 },

    #[error("expected a {expected:?} leaf point, got a {got:?} one")]
    WrongLeaf { expected: LegKind, got: LegKind },

    #[error("tangent vector is not purely {kind:?}")]
    NotInLeaf { kind: LegKind },

    #[error("points are not local: distance {0} exceeds 0.25")]
    NonLocal(f64),

    #[error("path endpoint misses the orbit target by {0}")]
    EndpointMismatch(f64),

    #[error("degenerate fit: distance {dist} hit the floating-point floor at t = {t}")]
    DegenerateFit { t: f64, dist: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::BadTolerance(tol))
    }
}
