//! Model-free Granger causality testing in expectiles.
//!
//! The crate is `no_std` (it needs `alloc`) and carries the numerical core:
//!
//! - [`expectile`]: asymmetric quadratic loss, empirical and Gaussian expectiles.
//! - [`marginal`]: empirical marginal distributions and log-return preprocessing.
//! - [`bicop`]: parametric pair-copulas with h-functions, fitting and selection.
//! - [`mvine`]: order-1 Markov M-vine models for `(X, Z_1, ..., Z_d)` panels.
//! - [`gc`]: the expectile causality statistic, copula bootstrap and the
//!   linear F-test baseline.
//! - [`dgp`]: simulation designs and the Monte-Carlo size/power harness.
//!
//! File formats, CSV ingestion, threading and the command-line tool live in the
//! companion `egc` crate.
#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bicop;
pub mod dgp;
pub mod error;
pub mod exec;
pub mod expectile;
pub mod gc;
pub mod marginal;
pub mod math;
pub mod mvine;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use expectile::{ExpectileLevel, ExpectileSolveSettings};
pub use rng::RandomStream;
