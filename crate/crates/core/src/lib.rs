//! Historical spelling normalization as character-level sequence labeling.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the model
//! container and the command line live in the `histnorm` crate.
//!
//! Pipeline: [`corpus`] loads and splits parallel token data,
//! [`alignment`] turns each historical/modern pair into a labeled
//! character sequence, [`model`] trains the bi-LSTM tagger (optionally with
//! auxiliary tasks) built on [`neural`], [`baseline`] trains the structured
//! perceptron, and [`eval`] scores both.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod alignment;
pub mod baseline;
pub mod corpus;
pub mod error;
pub mod eval;
mod math;
pub mod model;
pub mod neural;
pub mod rng;

pub use error::{Error, Result};
