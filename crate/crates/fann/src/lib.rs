//! Files, planted instances, runners and the `fann` command line on top of
//! [`fann_core`].

pub mod config;
pub mod io;
pub mod planted;
pub mod runner;
pub mod sampler;

pub use config::{Config, Constants, SamplerKind};
pub use planted::{generate_planted, PlantSpec, PlantedInstance};
pub use runner::{run_bench, run_fairness_test, BenchReport, FairnessReport};
