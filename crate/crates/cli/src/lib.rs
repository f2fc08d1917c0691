//! Command-line front end: argument definitions, one driver per
//! subcommand, the analytic sweep model and report encoding.

pub mod args;
pub mod commands;
pub mod report;
pub mod sweep;
