//! Configuration, sweeps, result tables, fits and figures for monitored
//! free-fermion ladder experiments, on top of `fermiladder-core`.

pub mod config;
pub mod pipeline;
pub mod plot;
pub mod sweep;
pub mod table;

pub use config::ExperimentConfig;
pub use table::ResultRow;
