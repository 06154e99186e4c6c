//! Parsimonious Gaussian mixtures, negentropy-based projection pursuit and
//! modal clustering of projected data with the Modal EM algorithm.
//!
//! The crate is organised around the four stages of the pipeline:
//!
//! - [`mixture`]: Gaussian mixture models with eigen-decomposed covariance
//!   families, EM fitting and BIC model selection.
//! - [`projection`]: orthonormal bases parametrised by Givens angles,
//!   mixture entropy approximations and a real-coded genetic algorithm that
//!   maximises negentropy over projection subspaces.
//! - [`modal`]: Modal EM ascent on a mixture density, mode merging and MAP
//!   assignment.
//! - [`data`]: synthetic generators, CSV ingestion and the adjusted Rand index.
//!
//! [`pipeline`] wires the stages together the same way the command-line tool
//! does.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod linalg;
pub mod mixture;
pub mod modal;
pub mod pipeline;
pub mod projection;

pub use error::{Error, Result};
