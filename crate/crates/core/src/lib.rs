//! Nonstationary, nonseparable spatio-temporal random fields built by
//! convolving a smoothing kernel with an order-based dependent Dirichlet
//! process (ODDP), plus the machinery needed to fit and interrogate them:
//!
//! - [`geometry`]: space-time coordinates, the padded computational region,
//!   Poisson point-process simulation, and distance-based atom orderings;
//! - [`oddp`]: stick-breaking weights under an ordering, tail-moment
//!   identities, and the truncation error bound;
//! - [`kernel`]: the anisotropic space-time kernel, its `Sigma(s)^{1/2}`
//!   construction, and the Gaussian-process bandwidth fields;
//! - [`model`]: the random function `f_k`, likelihood, priors, and joint
//!   log-posterior;
//! - [`covariance`]: closed-form conditional covariance/correlation and
//!   Monte Carlo unconditional correlation;
//! - [`ttmcmc`]: the transdimensional transformation-based MCMC engine
//!   (birth/death/no-change moves with exact Jacobians);
//! - [`synthgen`]: multivariate-normal utilities and the synthetic
//!   nonstationary non-Gaussian data generator.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all I/O, file
//! formats, and the CLI live in the companion `kcoddp-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod covariance;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub(crate) mod math;
pub mod model;
pub mod oddp;
pub mod rng;
pub mod synthgen;
pub mod ttmcmc;

pub use error::CoreError;
