//! Batch front end for the `costshare` engine: single runs, verification
//! and parameter sweeps, with CSV output.

pub mod commands;
pub mod report;

pub use commands::{cmd_run, cmd_sweep, cmd_verify, CliError, SweepParam, VerifySource};
pub use report::{write_csv, RunReport};
