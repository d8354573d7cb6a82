//! Rate certification, simulation and sweep tooling for momentum stochastic
//! gradient descent (MSGD) on objectives satisfying a Polyak-Łojasiewicz
//! inequality with state-dependent gradient noise.
//!
//! The crate is organised by subsystem:
//!
//! * [`landscape`]: objective oracles with known PL / inverse-PL constants and
//!   noise models whose conditional second moment scales with `f(x)`.
//! * [`discrete`]: the velocity-first MSGD recursion, a plain SGD baseline,
//!   ensemble statistics and the 2×2 spectral oracle on quadratics.
//! * [`certify`]: Lyapunov step coefficients, the constrained feasibility
//!   system, the certified-rate solver and all closed-form discrete rates.
//! * [`continuous`]: Euler–Maruyama simulation of the kinetic Langevin SDE,
//!   its first-order SGD counterpart, continuous-time rate formulas and the
//!   exact second-moment ODE oracle.
//! * [`sweep`] / [`render`]: grid sweeps written as CSV and rendered images.
//!
//! With the default `parallel` feature, Monte-Carlo ensembles and sweep cells
//! are evaluated on a rayon pool. Results are bitwise identical with the
//! feature disabled.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod config;
pub mod continuous;
pub mod discrete;
mod error;
pub mod landscape;
pub mod nelder_mead;
pub mod par;
pub mod render;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
