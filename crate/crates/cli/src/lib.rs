//! Command-line front end for the `torus-lqg` library: experiment runners,
//! file formats, the moment cache and the acceptance checks.

pub mod cache;
pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod parallel;
pub mod plot;
