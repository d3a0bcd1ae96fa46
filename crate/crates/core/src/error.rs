use core::fmt;

/// Errors raised by the analytic models and the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration field violates its invariant. `field` names the key.
    InvalidConfig { field: &'static str, reason: &'static str },
    /// Stationary nodes have no distance resolution.
    StationaryNodes,
    /// An annulus probability used as a denominator vanished.
    ResolutionTooLarge { state: usize, probability: f64 },
    /// The analytic distance kernel needs at least one station.
    NoStations,
    /// Adaptive quadrature hit its subdivision cap.
    QuadratureNotConverged { achieved: f64, requested: f64 },
    /// A pivot fell below the elimination threshold.
    SingularMatrix { context: &'static str },
    /// The chain has no unique stationary distribution.
    NotUnique,
    /// A fixed-point iteration did not settle.
    NoConvergence { context: &'static str, iterations: usize },
    /// The operation needs a chain with a single recharge block.
    NotQuasiBirthDeath { max_units: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig { field, reason } => write!(f, "invalid `{field}`: {reason}"),
            Error::StationaryNodes => {
                f.write_str("stationary nodes require explicit M=1 degenerate mode")
            }
            Error::ResolutionTooLarge { state, probability } => write!(
                f,
                "resolution M too large for this geometry (state {state} has probability {probability:e})"
            ),
            Error::NoStations => f.write_str("the distance kernel needs at least one charging station"),
            Error::QuadratureNotConverged { achieved, requested } => write!(
                f,
                "quadrature did not converge: achieved {achieved:e}, requested {requested:e}"
            ),
            Error::SingularMatrix { context } => write!(f, "singular matrix in {context}"),
            Error::NotUnique => f.write_str("chain has no unique stationary distribution"),
            Error::NoConvergence { context, iterations } => {
                write!(f, "{context} did not converge in {iterations} iterations")
            }
            Error::NotQuasiBirthDeath { max_units } => write!(
                f,
                "matrix-geometric solver needs one energy unit per slot, got {max_units}"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
