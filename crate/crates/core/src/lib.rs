//! Discrete rough-path analysis of residual networks.
//!
//! A residual network `x_{k+1} = x_k + sum_mu f_mu(x_k) (w^mu_{k+1} - w^mu_k)`
//! is a controlled difference equation driven by its weight sequence `w`.
//! This crate measures `w` in p-variation, builds its level-2 lift, and turns
//! discrete sewing and Grönwall arguments into computable a priori and
//! stability certificates.

// `!(x >= 0.0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cde;
pub mod error;
pub mod lift;
pub mod pvar;
pub mod series;
pub mod sewing;

pub use error::{Error, Result};
pub use series::{increments, Norm, TimeSeries, TriangularArray, ValueShape};
