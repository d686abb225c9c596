//! Simulation laboratory for the stochastic flow `dX = dB + 1(X > 0) dt` and its
//! construction from the local times of a Brownian motion stopped at zero.
//!
//! The crate is organised bottom-up:
//!
//! - [`rng`] and [`paths`]: reproducible random streams, Brownian and
//!   Bessel(3) paths, hitting times and the decomposition at the maximum.
//! - [`local_time`]: kernel estimates of the local-time field `l(t, x)` and
//!   the remaining local time `λ(t, x) = l(T_0, x) - l(t, x)`.
//! - [`flow_direct`]: Euler simulation of the flow driven by a Brownian path.
//! - [`flow_from_w`]: the flow, its driving motion and its derivative built
//!   from a single Brownian path through random changes of scale and a clock.
//! - [`besq`] and [`jacobi`]: squared Bessel processes and Jacobi diffusions.
//! - [`analytic`]: Sturm-Liouville solutions, path transforms and the
//!   martingale functionals used in the verification experiments.
//! - [`stats`]: the statistical tests every experiment reports through.
//! - [`config`], [`report`] and [`experiments`]: the experiment runner.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod besq;
pub mod config;
pub mod error;
pub mod experiments;
pub mod flow_direct;
pub mod flow_from_w;
pub mod interp;
pub mod jacobi;
pub mod local_time;
pub mod paths;
pub mod quad;
pub mod report;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use paths::{SamplePath, TimeSeries};
pub use rng::{derive_stream, RandomStream};
