pub mod config;
pub mod curiosity;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod rewards;
pub mod stage;
pub mod trainer;

pub use error::{Error, Result};
