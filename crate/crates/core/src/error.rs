use thiserror::Error;

/// Errors raised while loading cases or running simulations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("case parse error: {0}")]
    Parse(String),

    #[error("empty network: the case defines no buses")]
    EmptyNetwork,

    #[error("{device} references unknown bus {bus}")]
    DanglingBus { device: String, bus: u32 },

    #[error("{device}: {reason}")]
    Invariant { device: String, reason: String },

    #[error("network is disconnected: bus {bus} is unreachable from bus {root}")]
    Disconnected { root: u32, bus: u32 },

    #[error("singular network storage element: {0}")]
    SingularElement(String),

    #[error("event references nonexistent element: {0}")]
    UnknownElement(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("series order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("non-finite value in {state} at t = {time:.6} s")]
    NonFinite { state: String, time: f64 },

    #[error("micro step underflow at t = {time:.6} s: required step {required:.3e} s below minimum {h_min:.3e} s")]
    StepUnderflow { time: f64, required: f64, h_min: f64 },

    #[error("macro step diverged at t = {time:.6} s ({detail})")]
    MacroDivergence { time: f64, detail: String },

    #[error("reference solver diverged at t = {time:.6} s")]
    ReferenceDivergence { time: f64 },

    #[error("initialization did not converge: worst state {state} residual {residual:.3e}")]
    InitNonConvergence { state: String, residual: f64 },

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    PowerFlow { iterations: usize, mismatch: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("kernel grid too coarse: {points} points (need at least {min}, odd)")]
    GridTooCoarse { points: usize, min: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no overlapping micro-resolution spans between candidate and reference")]
    NoOverlap,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerical integration itself, as opposed to
    /// bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::StepUnderflow { .. }
                | Error::MacroDivergence { .. }
                | Error::ReferenceDivergence { .. }
                | Error::InitNonConvergence { .. }
                | Error::PowerFlow { .. }
                | Error::Quadrature(_)
        )
    }
}
