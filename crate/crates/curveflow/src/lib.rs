//! Command-line driver: configuration, preset initial curves, run
//! orchestration and file output.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
pub mod study;
