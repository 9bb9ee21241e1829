pub mod config;
pub mod data;
pub mod diagnosis;
pub mod error;
pub mod harness;
pub mod model;
pub mod monitoring;
pub mod numerics;
pub mod training;

pub use error::{CgstaeError, Result};
