//! Simulation and analysis of a zero-sum game on networked consensus
//! dynamics: an adversary breaks links while a designer reinforces them.

// NaN must fail validation, so `!(x > 0.0)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod quadrature;
pub mod report;
pub mod strategies;

pub use error::{Error, Result};
pub mod scenario;
pub mod cli;
