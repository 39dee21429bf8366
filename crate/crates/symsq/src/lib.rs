pub mod arith;
pub mod cli;
pub mod coeffs;
pub mod data;
pub mod error;
pub mod kernels;
pub mod numeric;
pub mod petersson;
pub mod qexp;
pub mod report;
pub mod voronoi;

pub use error::{Error, Result};
