pub mod bounds;
pub mod error;
pub mod experiment;
pub mod format;
pub mod linalg;
pub mod models;
pub mod optimal_filter;
pub mod realization;
pub mod varx;

pub use error::{Error, Result};
