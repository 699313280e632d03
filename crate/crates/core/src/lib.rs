//! Generative art after the pellet patterns of sand-bubbler crabs, with three
//! computational aesthetic measures and a measure-guided generator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aesthetics;
pub mod error;
pub mod guidance;
pub mod harness;
pub mod pattern_gen;
pub mod raster;
pub mod rng;

pub use error::{Error, Result};
