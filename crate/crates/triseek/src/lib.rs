//! Cooperative source seeking with a three-agent formation.
//!
//! Three robots look for the maximum of an unknown scalar field — a signal
//! strength, a concentration, a light intensity — using nothing but the
//! value each robot measures at its own position. Two followers hold a
//! triangle around the lead robot; the triangle doubles as a
//! finite-difference stencil whose three samples yield a gradient estimate,
//! and the lead robot climbs that estimate while the followers converge to
//! their desired offsets at known exponential rates.
//!
//! The crate has two halves:
//!
//! - a simulator ([`sim`]) for the coupled formation-and-seeking dynamics,
//!   with deterministic integration and strict admissibility checks; and
//! - a certification layer ([`analysis`]) that bounds the gradient-estimate
//!   error, searches for a quadratic stability certificate of the error
//!   dynamics, and converts it into an explicit residual-ball radius for
//!   the distance to the maximizer, then audits all of it against the
//!   recorded trajectory.
//!
//! [`config`] parses TOML experiment descriptions, [`io`] round-trips
//! trajectories through a fixed-schema CSV with full 17-digit precision,
//! and [`cli`] wires everything into the `triseek` binary with `simulate`,
//! `analyze`, `lmi-check`, and `verify` subcommands.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! - `source_seeking`: the flagship Gaussian-hill run, start to settle.
//! - `multimodal_field`: a three-peak field, long horizon, basin capture.
//! - `gradient_estimation`: exactness on affine fields and the curvature
//!   correction on quadratic ones.
//! - `formation_geometry`: admissible starts and the determinant guarantee.
//! - `lmi_certification`: certificate search, scaling invariance, radii.
//! - `taylor_and_regularity`: field regularity constants and their audit.
//! - `trajectory_csv`: byte-exact CSV round-trips and report reproduction.
//!
//! Run one with `cargo run --release --example source_seeking`.

// Guards like `!(v > 0.0)` are load-bearing: they reject NaN along with
// out-of-range values in one comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
