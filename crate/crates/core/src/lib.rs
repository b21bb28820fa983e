//! Boundary feedback stabilization of first-order port-Hamiltonian systems
//! with bounded-variation energy densities.
//!
//! The crate covers the whole pipeline: BV densities and their mollification
//! ([`density`]), the plant and its boundary geometry ([`model`]), the
//! hypotheses of the decay theorem as trace-space eigenproblems
//! ([`conditions`]), the explicit decay certificate ([`certificate`]) and an
//! energy-exact simulator used to test it ([`simulator`]).

pub mod certificate;
pub mod conditions;
pub mod density;
pub mod error;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod simulator;

pub use certificate::{decay_certificate, energy_envelope, sharpened_certificate, DecayCertificate};
pub use conditions::{check_dissipative, check_impedance_passive, condition_report, kernel_basis, rank_check, trace_domination, ConditionReport};
pub use density::{mollify, Density, PiecewiseMatrixDensity, Side, SmoothDensity};
pub use error::{Error, Result};
pub use model::{boundary_form, close_loop, string_model, timoshenko_model, ClosedLoopSystem, Endpoint, PortHamiltonianSystem};
