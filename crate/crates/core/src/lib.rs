//! Sentiment co-clustering of a tripartite feature–tweet–user graph by
//! non-negative matrix tri-factorization.
//!
//! * [`linalg`] – sparse/dense kernels the update rules are built from
//! * [`offline`] – the batch objective and its multiplicative updates
//! * [`online`] – the streaming variant with temporal regularization, plus the
//!   mini-batch and full-batch baselines
//! * [`eval`] – cluster readout, accuracy/NMI, planted-partition generator
//! * [`io`], [`report`], [`cli`] – file formats and the command-line driver

pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod offline;
pub mod online;
pub mod report;

pub use error::{Error, Result};
