//! Hypothesis-testing analysis and simulation of RSS fingerprinting localization.

pub mod divergence;
pub mod error;
pub mod fingerprinting;
pub mod geometry;
pub mod harness;
pub mod hypothesis;
pub mod placement;
pub mod propagation;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{Point, Region, TrainingGrid};
