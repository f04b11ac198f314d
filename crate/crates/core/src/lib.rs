//! Simulation and analysis of grid-synchronizing phase-locked loops.
//!
//! The crate models a balanced three-phase source, the generalized SRF and
//! ATAN estimators acting on its dq voltage, and the closed-loop error
//! dynamics in the angle error `delta = theta_hat - theta` and the frequency
//! estimate `omega_hat`. On top of the simulator it evaluates storage and
//! Lyapunov functions, classifies equilibria, builds and validates
//! region-of-attraction estimates and computes ultimate bounds under a
//! bounded rate of change of frequency.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod pll;
pub mod scenarios;
pub mod signals;

pub use error::{Error, Result};
