//! Inference under multi-modal objectives: multi-start gradient ascent,
//! basin analysis, confidence constructions, EM for Gaussian mixtures,
//! mode hunting and a pooled two-sample test.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ascent;
pub mod boot;
pub mod data;
pub mod diagnostics;
pub mod domain;
pub mod em;
pub mod error;
pub mod infer;
pub mod landscape;
pub mod model;
pub mod modehunt;
pub mod quad;
pub mod rng;
pub mod special;
pub mod twosample;

pub use nalgebra;

pub use data::Dataset;
pub use domain::{Domain, Grid, ParamVector};
pub use error::{Error, Result};
