//! Information bounds and particle-filter simulation for parameter tracking
//! from 1-bit (hard-limited) measurements.

pub mod error;
pub mod experiments;
pub mod filters;
pub mod info_measures;
pub mod quantized_channel;
pub mod signal_models;
pub mod special;
pub mod state_space;
pub mod streams;
pub mod tracking_bounds;
pub mod units;

pub use error::{Error, Result};
