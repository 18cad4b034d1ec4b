#![no_std]
#![doc = include_str!("../README.md")]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod bose;
pub mod classical;
pub mod ensemble;
pub mod error;
pub mod fft;
pub mod model;
pub mod phasespace;
pub mod quantum;
pub mod scenario;
pub mod series;

pub use error::{Error, Result};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
