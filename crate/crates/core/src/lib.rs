pub mod basis;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod prediction;
pub mod quadrature;
pub mod resnet;
pub mod rng;
pub mod solvers;
pub mod training;
pub mod verify;

pub use error::{EvoError, Result};
