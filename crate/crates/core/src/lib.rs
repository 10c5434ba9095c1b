// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod classify;
pub mod config;
pub mod container;
pub mod denoiser;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod qecmodel;
pub mod seed;
pub mod simcam;

pub use error::{Error, Result};
