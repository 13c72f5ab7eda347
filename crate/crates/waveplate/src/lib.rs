//! Finite-element simulation and spectral analysis of a two-dimensional
//! transmission system coupling a wave equation on Ω₁ with a Kirchhoff plate
//! on Ω₂ across a straight interface, damped by dynamical boundary controls
//! on the exterior boundaries.
//!
//! The crate provides:
//! - tagged two-subdomain triangulations and generators ([`mesh`]),
//! - validators for the geometric hypotheses and multiplier identities
//!   ([`geometry`]),
//! - sparse linear algebra with complex support ([`linalg`]),
//! - P1/Morley form assembly with interface tying ([`fem`]),
//! - the first-order generator, energy and resolvent solves ([`system`]),
//! - energy-conserving implicit-midpoint time integration ([`dynamics`]),
//! - eigenpairs, the non-uniform-stability witness sequence and resolvent
//!   norm sweeps ([`spectral`]),
//! - decay-law fitting ([`analysis`]).

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
