pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod model_spec;
pub mod rng;
pub mod sparsity_tests;
pub mod stats;
pub mod theory_lab;

pub use error::{Error, Result};
