//! Engine configuration.

use std::fmt;
use std::str::FromStr;

use crate::dt::{MicroConfig, StepControl};
use crate::error::{Error, Result};
use crate::kernel::{DEFAULT_D, DEFAULT_GRID};
use crate::transforms::Compression;

/// Integration strategy of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Windows of width `η` every macro period `H`.
    HmmFixed,
    /// Windows followed by macro steps of controlled length `Mh`.
    HmmVariable,
    /// The micro-solver over the whole horizon.
    MicroOnly,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmm-fixed" => Ok(Mode::HmmFixed),
            "hmm-variable" => Ok(Mode::HmmVariable),
            "micro-only" => Ok(Mode::MicroOnly),
            _ => Err(Error::Config(format!(
                "unknown mode '{s}' (expected hmm-fixed, hmm-variable or micro-only)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::HmmFixed => "hmm-fixed",
            Mode::HmmVariable => "hmm-variable",
            Mode::MicroOnly => "micro-only",
        })
    }
}

/// Window width of the two-area configuration (s).
pub const DEFAULT_ETA: f64 = 0.0264;

#[derive(Debug, Clone, PartialEq)]
pub struct HmmConfig {
    pub micro: MicroConfig,
    /// Micro window `η` (s).
    pub eta: f64,
    /// Macro period `H` (s), fixed mode.
    pub macro_period: f64,
    /// Macro error tolerance, variable mode.
    pub tol: f64,
    pub mh_max: f64,
    pub rho_max: f64,
    /// Macro step at the start and after each disturbance.
    pub mh_init: f64,
    /// Steps with `e > rejection_factor · tol` are rejected.
    pub rejection_factor: f64,
    /// Micro-only span at the start and after each disturbance (s).
    pub warmup: f64,
    pub kernel_d: f64,
    pub kernel_grid: usize,
    pub compression: Compression,
    /// Start the macro step with the fast block set to its kernel average
    /// over the window instead of its value at the window end.
    pub use_averaged_window_state: bool,
}

impl Default for HmmConfig {
    fn default() -> Self {
        Self {
            micro: MicroConfig::default(),
            eta: DEFAULT_ETA,
            macro_period: 2.625 * DEFAULT_ETA,
            tol: 1e-2,
            mh_max: 0.04,
            rho_max: 1.05,
            mh_init: 0.01,
            rejection_factor: 10.0,
            warmup: 1.0,
            kernel_d: DEFAULT_D,
            kernel_grid: DEFAULT_GRID,
            compression: Compression::default(),
            use_averaged_window_state: false,
        }
    }
}

impl HmmConfig {
    /// Micro-solver with a fixed step: `η / steps_per_window`.
    pub fn with_fixed_micro_steps(mut self, steps_per_window: usize) -> Self {
        self.micro.control = StepControl::Fixed(self.eta / steps_per_window as f64);
        self
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        self.micro.validate()?;
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.warmup >= 0.0) {
            return bad("warmup must be >= 0");
        }
        if mode == Mode::MicroOnly {
            return Ok(());
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("window width eta must be positive");
        }
        if !(self.kernel_d > 0.0) {
            return bad("kernel shape D must be positive");
        }
        match mode {
            Mode::HmmFixed if !(self.macro_period >= self.eta && self.macro_period.is_finite()) => {
                bad("macro period H must satisfy H >= eta")
            }
            Mode::HmmVariable => {
                if !(self.tol > 0.0) {
                    return bad("tolerance must be positive");
                }
                if !(self.mh_max > 0.0) {
                    return bad("Mh_max must be positive");
                }
                if !(self.rho_max > 1.0) {
                    return bad("rho_max must exceed 1");
                }
                if !(self.mh_init > 0.0 && self.mh_init <= self.mh_max) {
                    return bad("initial macro step must lie in (0, Mh_max]");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}
