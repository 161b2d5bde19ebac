//! Experiment harness for `msinfer-core`: JSON configuration, fixtures with
//! cached population truth, Monte Carlo coverage runs, text and CSV formats.

pub mod config;
pub mod coverage;
pub mod fixture;
pub mod io;

pub use config::{ExperimentConfig, InitSpec, Method};
pub use coverage::{run_coverage, CoverageReport, MethodCoverage, Type1Summary};
pub use fixture::{population_truth, Fixture, PopulationTruth};
