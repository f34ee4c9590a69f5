pub mod classifier;
pub mod cli;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod matrix;
pub mod report;
pub mod rng;
pub mod smoothing;
pub mod synthetic;
pub mod training;
pub mod transfer;

pub use error::{Error, Result};
