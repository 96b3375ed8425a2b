//! Two-timescale electromagnetic transient simulation.
//!
//! A power system is described by a [`model::PowerSystemCase`], turned into a
//! [`model::SystemModel`] (device equations plus the linear three-phase
//! network) and simulated by [`hmm::run_simulation`].  Fast network dynamics
//! are resolved by a power-series micro-solver ([`dt`]) over short windows;
//! the slow macro-state is advanced with large steps driven by a
//! kernel-averaged force ([`kernel`]).  [`reference`] provides the
//! fixed-step RK4 baseline and the error and speedup metrics.

// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dt;
pub mod error;
pub mod hmm;
pub mod kernel;
pub mod model;
pub mod network;
pub mod reference;
pub mod transforms;

pub use error::{Error, Result};
