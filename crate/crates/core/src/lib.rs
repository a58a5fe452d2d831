//! Argument-mining experiment toolkit.

pub mod client;
pub mod corpus;
mod error;
pub mod jsonl;
pub mod labels;
pub mod merger;
pub mod metrics;
pub mod parser;
pub mod pipeline;
pub mod prompt;
pub mod sampler;

pub use error::{Error, Result};
pub use labels::{DatasetId, TaskId};
