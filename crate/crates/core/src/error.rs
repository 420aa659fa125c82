use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates a domain precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `I - K` is numerically singular (condition estimate above the threshold,
    /// or an exactly zero pivot).
    #[error("singular system: condition estimate {condition:.3e} exceeds {limit:.0e}")]
    Singular { condition: f64, limit: f64 },

    #[error("grid spans [{grid_a}, {grid_b}] but the problem needs [{a}, {b}]")]
    GridMismatch { grid_a: f64, grid_b: f64, a: f64, b: f64 },

    #[error("x = {x} lies outside [{a}, {b}]")]
    OutOfInterval { x: f64, a: f64, b: f64 },

    #[error("right-hand side {index} has length {got}, expected {expected}")]
    DimensionMismatch { index: usize, got: usize, expected: usize },

    /// `P_i(0; 0, h)` is so close to one that the renewal formula blows up.
    #[error("degenerate geometry: lower-exit probability from 0 is {oc} under H{hypothesis}")]
    DegenerateGeometry { hypothesis: u8, oc: f64 },

    #[error("tail ratio did not stabilise within {steps} steps under H{hypothesis}")]
    NonConvergence { hypothesis: u8, steps: usize },

    #[error("{hits} of {reps} replications hit the step cap {cap} (fraction {fraction:.2e})")]
    CapExceeded {
        cap: u64,
        hits: u64,
        reps: u64,
        fraction: f64,
    },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
