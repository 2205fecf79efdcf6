// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub mod cli;
pub mod data_model;
pub mod evaluation;
pub mod explain;
pub mod modelzoo;
pub mod pipeline;
pub mod plot;
pub mod synth;
pub mod trainer;
pub mod tuner;
