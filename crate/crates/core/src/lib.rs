//! Exponential decay-rate certificates for linear port-Hamiltonian systems on
//! an interval with boundary dissipation.
//!
//! Given a system `dz/dt = (P1 d/dx + P0 - G0) L(x) z` closed by `u_a = 0`,
//! `u_b + K y_b = 0`, the [`certifier`] computes constants `(M, alpha)` with
//! `H(t) <= M exp(-alpha t) H(0)` by the multiplier method, and the
//! [`simulator`] checks them against an energy-consistent discretization.

pub mod catalog;
pub mod certifier;
pub mod coefficient;
pub mod error;
pub mod expr;
pub mod io;
pub mod linalg;
pub mod multiplier;
pub mod params;
pub mod simulator;
pub mod system;

pub use certifier::{assemble_certificate, best_certificate, check_positivity, compute_c, Certificate, Family};
pub use coefficient::{CoefficientFunction, DerivativeMode};
pub use error::{Error, Result};
pub use multiplier::MultiplierSpec;
pub use params::{extremal_parameters, SystemParameters, DEFAULT_GRID};
pub use simulator::{discretize, fit_decay, simulate, verify_certificate, SimulationTrace};
pub use system::{energy, validate_system, PhSystem, StateField, ValidationReport};
