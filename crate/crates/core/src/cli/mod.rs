//! Configuration, orchestration and report emission behind the
//! `blowuplab` binary.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{
    cmd_criterion, cmd_energy, cmd_rate_check, cmd_simulate, cmd_sweep, exit_code, Status,
};
pub use config::{RunConfig, SweepSpec};
