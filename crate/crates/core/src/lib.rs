pub mod cli;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod ingest;
pub mod linalg;
pub mod output;
pub mod protocol;
pub mod svm;
pub mod synthgen;
pub mod windowing;

pub use error::{Error, Result};
