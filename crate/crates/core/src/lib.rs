//! Numerical laboratory for the viscoelastic wave equation
//!
//! ```text
//! u_tt - div(A ∇u) + ∫_0^t f(t-s) div(a ∇u(s)) ds + b h(u_t) = k |u|^{p-2} u
//! ```
//!
//! on an interval with homogeneous Dirichlet data. The crate provides the
//! relaxation-kernel toolkit ([`kernel`]), a leapfrog finite-difference solver
//! with two memory evaluators ([`solver`]), the energy functionals and
//! potential-well gate ([`energy`]), and decay-rate fitting ([`decay`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decay;
pub mod energy;
pub mod error;
pub mod kernel;
pub mod presets;
pub mod quadrature;
pub mod solver;
pub mod trace_io;

pub use decay::DecayFitReport;
pub use energy::{EnergySample, EnergyTrace, WellPosednessReport};
pub use error::{Error, Result};
pub use kernel::{ConvexityData, DecayEnvelope, Kernel, KernelSpec};
pub use solver::{ProblemConfig, SimulationState};
