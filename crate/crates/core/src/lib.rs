//! Fair panel selection for sortition.

pub mod adversary;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod objectives;
pub mod panels;
pub mod report;
pub mod rounding;
pub mod solver;

pub use error::{Error, Result};
