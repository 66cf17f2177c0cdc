pub mod error;
pub mod numerics;
pub mod wave;
pub mod ensemble;
pub mod monitors;
pub mod experiments;
pub mod config;
pub mod check;

pub use error::{Error, Result};
