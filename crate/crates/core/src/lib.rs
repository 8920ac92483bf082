pub mod config;
pub mod diversity;
pub mod error;
pub mod frontend;
pub mod fusion;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod scoring;
pub mod tensor;

pub use error::{Error, Result};
