//! Hyperparameter selection for time-series models by the artificial
//! delete-d jackknife, with an elastic-net VAR estimated by ECM over a
//! missing-data state space as the built-in model family.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod combinatorics;
pub mod ecm;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod linalg;
mod math;
pub mod model;
pub mod rng;
pub mod search;
pub mod simulation;
pub mod state_space;
pub mod subsampling;

pub use error::{Error, Result};
pub use model::{
    apply_pattern, loss, Hyperparameters, SubsampleFamily, SubsamplePattern, TimeSeriesDataset, WeightVector,
};
pub use nalgebra;
