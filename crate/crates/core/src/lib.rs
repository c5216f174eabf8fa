//! Piecewise-constant control synthesis for a Heisenberg spin chain driven on
//! its first site, with a penalty on the high-frequency share of the control
//! power spectrum and an ideal low-pass filter to measure robustness.
//!
//! The pipeline is:
//!
//! * [`model`] builds the drift Hamiltonian, the two Zeeman control generators
//!   and the target gates as dense complex matrices.
//! * [`dynamics`] propagates piecewise-constant controls and computes the
//!   gate fidelity with its exact gradient.
//! * [`spectral`] computes the band power fraction of a control vector and
//!   combines it with the fidelity into the minimized objective.
//! * [`filter`] applies the ideal low-pass filter through the sine integral
//!   and re-evaluates the fidelity of the smoothed pulses.
//! * [`optimize`] runs BFGS from random starts and collects ensembles.

pub mod dynamics;
pub mod error;
pub mod filter;
pub mod model;
pub mod optimize;
pub mod spectral;

pub use error::{Error, Result};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix used for all operators.
pub type CMatrix = DMatrix<Complex64>;

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest elementwise deviation of `u† u` from the identity.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    max_abs_diff(&prod, &CMatrix::identity(u.nrows(), u.ncols()))
}

/// Largest elementwise deviation of `m` from its adjoint.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}
