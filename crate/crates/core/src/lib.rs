//! Bandits with knapsacks: instance model, LP ground truth, confidence
//! estimators (classical and emulated quantum), the two learning
//! algorithms, and a regret benchmarking harness.

pub mod algos;
pub mod bench;
pub mod error;
pub mod estimators;
pub mod lp;
pub mod model;

pub use error::{BwkError, Result};
