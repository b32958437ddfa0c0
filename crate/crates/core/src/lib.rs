//! Mechanical equilibria of repulsive particles pinned in an interval, their
//! discrete boundary layers, and the asymptotic and variational quantities
//! used to check them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod blayer;
pub mod energetics;
pub mod equilibrium;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod potential;

pub use error::{Error, Result};
pub use potential::PotentialSpec;
