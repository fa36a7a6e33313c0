//! Multi-cell network simulator for base stations carrying rotatable antenna
//! surfaces on a circular track.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: rotation matrices, antenna placement and the rotation
//!   feasibility penalty.
//! * [`channel`]: element pattern, steering vectors, path loss and seeded
//!   Monte Carlo channel draws.
//! * [`precoder`]: short-term WMMSE solvers (plain, interference-power
//!   constrained, network-wide) and rate evaluators.
//! * [`longterm`]: particle swarm search and the sample-average cell rate.
//! * [`coordination`]: adjacency graph, random maximal matchings, pairwise
//!   threshold negotiation over a simulated message bus and the alternating
//!   optimisation loop.
//! * [`centralized`]: the global SAA + PSO benchmark.
//! * [`scenarios`]: the shipped network layouts and benchmark schemes.
//! * [`harness`]: experiment configuration, execution and result files.
//! * [`oracles`]: golden-case fixtures and independent reference evaluators
//!   used by the test suites.

// Negated comparisons are how NaN is rejected in the validators.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centralized;
pub mod channel;
pub mod coordination;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod longterm;
pub mod oracles;
pub mod precoder;
pub mod scenarios;
pub mod seeding;
pub mod selftest;

pub use error::{Error, Result};

use nalgebra::{Complex, DMatrix, DVector};

/// Complex double used for all baseband quantities.
pub type C64 = Complex<f64>;
/// Column vector of complex baseband samples.
pub type CVector = DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;
