//! Simulator and analysis toolkit for non-Abelian holonomic rotations of a
//! heavy-hole spin qubit in a five-level driven quantum dot.
//!
//! Modules, bottom-up:
//!
//! * [`qcore`]: states, density matrices, qubit gates, matrix exponential.
//! * [`pulses`]: Gaussian envelopes and the y/z pulse sets.
//! * [`model`]: RWA Hamiltonians and Lindblad channels.
//! * [`darkspace`]: mixing angles, dark states, gauge connection.
//! * [`holonomy`]: geometric-phase quadratures and predicted gates.
//! * [`propagate`]: Schrodinger/Lindblad integration and a matrix-exponential oracle.
//! * [`scenarios`]: initialization, sweeps, gate fidelities, readout.

pub mod darkspace;
pub mod error;
pub mod holonomy;
pub mod model;
pub mod propagate;
pub mod pulses;
pub mod qcore;
pub mod quadrature;
pub mod scenarios;

pub use error::{Error, Result};
