//! Differential-transformation (Taylor series) micro-solver.

pub mod micro;
pub mod series;
pub mod tape;

pub use micro::{
    defect_error, network_coefficients, run_micro_window, select_step, system_coefficients, DefectScope, MicroConfig, MicroSolver,
    MicroWindowResult, StepControl,
};
pub use series::{dt_add, dt_product, dt_reciprocal, dt_scale, dt_sin_cos, dt_sub, DtSeries};
pub use tape::{StateBound, Tape, TapeBuilder, TapeWork, Var};
