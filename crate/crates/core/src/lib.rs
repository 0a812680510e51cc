pub mod baselines;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
