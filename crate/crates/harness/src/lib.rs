//! Experiment harness: configuration, datasets, trial pipelines and the
//! results grid.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod seed;
pub mod table1;
