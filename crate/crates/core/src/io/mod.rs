//! File formats: AEBF tensors, flat key=value run configuration and the CSV
//! schemas used by the command-line tool.

pub mod config;
pub mod tables;
pub mod tensor_file;

pub use config::RunConfig;
pub use tensor_file::{read_tensor, write_tensor, Tensor};
