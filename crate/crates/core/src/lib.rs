pub mod annot;
pub mod energy;
pub mod error;
pub mod grid;
pub mod learn;
pub mod raster;
pub mod sim;
pub mod slic;
pub mod workflow;

pub use error::{DivergedError, Error, Result};
