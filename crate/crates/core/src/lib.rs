//! Steady-state equilibria of a token economy in which users hold a native
//! token to pay for blockspace, validators supply blockspace at a convex
//! cost, and the protocol may burn part of each fee.
//!
//! The crate solves the steady state under several demand regimes, compares
//! allocations with the first best, simulates token-supply rules and checks
//! every analytic solution against brute-force oracles.

pub mod cli;
pub mod econ;
pub mod equilibrium;
pub mod error;
pub mod first_best;
pub mod oracle;
pub mod output;
pub mod policy;
pub mod roots;
pub mod scenario;
pub mod welfare;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
