//! The `krigrid` benchmark driver: configuration, the per-trial pipeline,
//! the full benchmark and the individual stage commands.

pub mod bench;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod stages;
pub mod synthetic;

pub use bench::{run_benchmark, BenchOutcome};
pub use config::BenchConfig;
