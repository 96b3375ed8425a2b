//! Heterogeneous multiscale engine: warmup spans, micro windows, kernel
//! force estimation and macro steps.

pub mod config;
pub mod engine;
pub mod init;
pub mod macro_step;
pub mod result;
pub mod schedule;

pub use config::{HmmConfig, Mode, DEFAULT_ETA};
pub use engine::{macro_angles, run_simulation};
pub use init::{equilibrium_residual, initialize, InitOptions};
pub use macro_step::{controller, macro_step_fixed, macro_step_variable, ControllerStep};
pub use result::{EventRecord, ForceRecord, MacroStepRecord, Resolution, Sample, SimulationResult, Timings};
pub use schedule::{Disturbance, EventSchedule, TimedEvent};
