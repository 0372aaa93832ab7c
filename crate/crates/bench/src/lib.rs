//! Experiment harness around `proxnag-core`: configuration, tuning, runs,
//! summaries and the command-line entry points.

pub mod commands;
pub mod config;
pub mod runner;
pub mod summary;
pub mod table;
pub mod tuning;
