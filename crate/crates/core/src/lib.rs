//! Pathwise simulation of one-dimensional SDEs driven by rough fractional
//! Brownian noise (Hurst parameter `H < 1/2`) together with Malliavin-weight
//! Monte Carlo estimators for option-price sensitivities.
//!
//! The crate is organised around the pipeline
//!
//! ```text
//! kernel  ->  noise  ->  sde / model  ->  greeks / stability
//! ```
//!
//! * [`kernel`] - the Volterra kernel `K_H`, its derivative, the fBm
//!   covariance `R_H`, and discretised Riemann-Liouville operators,
//! * [`noise`] - joint sampling of the driving Wiener process, the fBm it
//!   generates, and an independent Wiener process, on one time grid,
//! * [`sde`] - Euler solvers for singular-drift SDEs, drift mollification,
//!   first-variation processes (exponential and local-time routes),
//! * [`model`] - the correlated rough-volatility stock model and its
//!   pathwise sensitivities,
//! * [`greeks`] - Bismut-Elworthy-Li weight estimators for delta/vega, the
//!   common-random-number finite-difference oracle, and Girsanov-density
//!   diagnostics,
//! * [`stability`] - the moment-scaling harness for flow stability in the
//!   initial condition.
//!
//! The crate is `no_std` (with `alloc`); all elementary functions go through
//! `libm` so results are identical across targets and feature sets. Every
//! sampler and estimator is a deterministic function of `(seed, path index)`,
//! independent of thread count; the optional `parallel` feature distributes
//! path loops with rayon without changing any output bit.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod grid;
pub mod greeks;
pub mod kernel;
pub mod math;
pub mod model;
pub mod noise;
pub mod rng;
pub mod sde;
pub mod stability;

pub use error::{Error, Result};
pub use grid::{GridFunction, TimeGrid};
pub use kernel::{HurstParam, HurstRegime};
pub use noise::{MixSpec, NoiseBundle, NoiseSampler};
pub use sde::{DriftSpec, SdePath};
