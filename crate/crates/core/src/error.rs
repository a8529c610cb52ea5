use thiserror::Error;

use crate::fields::FieldId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a trajectory could not be continued across a jump surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// The field on the far side is tangent to the surface.
    Tangential,
    /// Both one-sided fields point into the surface while integrating backward in time.
    AttractingBackward,
    /// Both one-sided fields point into the surface and their Filippov combination slides.
    Sliding,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature produced a non-finite value at node {index}")]
    Quadrature { index: usize },

    #[error(
        "point {point:?} lies on jump component {component} of field {field}; one-sided values {minus:?} / {plus:?}"
    )]
    OnJump {
        field: FieldId,
        component: usize,
        point: [f64; 2],
        minus: [f64; 2],
        plus: [f64; 2],
    },

    #[error("point {point:?} is not on any jump component of field {field}")]
    NoJump { field: FieldId, point: [f64; 2] },

    #[error("non-transversal crossing ({kind:?}) of field {field} at {point:?}")]
    NonTransversalCrossing {
        field: FieldId,
        point: [f64; 2],
        kind: CrossingKind,
    },

    #[error("trajectory of field {field} from {start:?} exceeded {max} crossings")]
    Runaway {
        field: FieldId,
        start: [f64; 2],
        max: usize,
    },

    #[error("method {method} is not available for field {field}")]
    UnsupportedMethod { field: FieldId, method: &'static str },

    #[error("time {0} is not stored in the ensemble")]
    MissingTime(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::NonTransversalCrossing { .. }
                | Error::Runaway { .. }
                | Error::OnJump { .. }
        )
    }
}
