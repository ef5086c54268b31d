//! Gittins indices for diffusion-driven bandit arms.
//!
//! A continuous-time two-armed bandit pits a pure Brownian arm against a
//! super-diffusive mean-preserving-spread arm. This crate computes the
//! Gittins index of each arm by several independent routes and analyzes the
//! resulting allocation problem:
//!
//! * [`rewards`] — admissible reward structures `(h, α, k, K)`;
//! * [`numerics`] — exponential-weight quadrature and sign-change location;
//! * [`closed_form`] — explicit index formulas (Brownian, drifted, spread);
//! * [`doob`] — the general ODE/Wronskian engine and the change-of-measure
//!   transform with its verifiable identities;
//! * [`allocation`] — index difference, phase diagram, thresholds;
//! * [`sde`] — Euler–Maruyama and exact transition sampling, densities, and
//!   the seeded policy tournament;
//! * [`oracle`] — a lattice optimal-stopping oracle (retirement calibration)
//!   that arbitrates every other engine.

pub mod allocation;
pub mod closed_form;
pub mod doob;
pub mod error;
pub mod numerics;
pub mod oracle;
pub mod rewards;
pub mod sde;

pub use error::{Error, Result};
