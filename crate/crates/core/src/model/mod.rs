//! Power system description, state layout and the assembled model.

pub mod case;
pub mod devices;
pub mod layout;
pub mod powerflow;
pub mod system;

pub use case::{
    load_case, load_case_file, Bus, DeviceRef, Exciter, Governor, GridFollowingIbr, Line, Load, LoadKind,
    PowerSystemCase, SynchronousGenerator, SystemSettings,
};
pub use devices::{GeneratorSetpoints, IbrSetpoints};
pub use layout::{build_layout, EdgeKind, Owner, StateInfo, StateLayout, Timescale};
pub use powerflow::{admittance_matrix, solve_power_flow, PowerFlowSolution};
pub use system::{Device, Event, Injection, RhsScratch, SystemModel};
