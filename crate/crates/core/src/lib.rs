//! Discrete-time quantum stochastic walks (QSWs) on arbitrary directed graphs.
//!
//! A QSW time-step mixes coherent (unitary) evolution between graph vertices
//! with incoherent vertex-to-vertex jumps, weighted by a coherence parameter
//! `alpha` and per-edge jump rates `kappa`. This crate implements the step two
//! ways and verifies that they agree:
//!
//! * exactly, as a completely positive trace-preserving Kraus channel acting
//!   on vertex density matrices ([`channel`]);
//! * stochastically, as single-excitation trajectories on a doubled
//!   system+ancilla space, driven by ancilla coupling, projective measurement
//!   and classical feed-forward ([`protocol`]); averaging trajectories
//!   ([`ensemble`]) converges to the exact channel.
//!
//! [`ctreduce`] additionally maps a restricted class of continuous-time QSWs
//! (Lindblad dynamics whose outgoing rates have a uniform row sum) onto a
//! discrete-time walk, and provides the exact Lindblad propagator used to
//! quantify the error of that reduction.

// Tolerance guards are written `!(x <= tol)` so that NaN fails validation;
// the direct `x > tol` comparison would silently accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod ctreduce;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod protocol;
pub mod random;

pub use error::{Error, Result};
pub use graph::{DensityMatrix, QswGraph};
pub use linalg::{CMatrix, CVector, StateVector};
