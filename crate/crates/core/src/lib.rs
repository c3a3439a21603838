//! Reconstruction of the division rate of the increment-structured
//! (adder) growth-fragmentation model from snapshot size data.

pub mod commands;
pub mod dilation;
pub mod error;
pub mod forward;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod sample;

pub use error::{Error, ErrorFamily, Result};
pub use grid::{Grid1D, GriddedFunction};
