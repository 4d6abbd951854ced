//! Bayesian/frequentist compromise test decisions for one-arm trials that
//! borrow historical information, with exact operating characteristics.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: normal and beta special functions, binomial tails,
//!   Gauss–Legendre quadrature, bisection.
//! - [`distributions`]: priors, conjugate posteriors, marginal likelihoods.
//! - [`decisions`]: the FD, BD, CD, CD-Adapt, RMD and TI-RBD rules and their
//!   rejection regions.
//! - [`oc`]: power, type I error, expected power, integrated risk, RSL.
//! - [`design`]: sample-size search, weight and sampling-prior sweeps.
//! - [`scenario`]: the JSON scenario schema and the built-in scenarios.

pub mod decisions;
pub mod design;
pub mod distributions;
mod error;
pub mod numerics;
pub mod oc;
pub mod scenario;

pub use error::{Error, Result};
