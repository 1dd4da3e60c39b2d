//! Configuration, serialization, checkpointing.

pub mod checkpoint;
pub mod config;
pub mod outputs;
