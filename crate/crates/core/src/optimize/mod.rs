//! BFGS minimization and the multi-start experiment driver.

mod bfgs;
mod experiment;
pub mod line_search;

pub use bfgs::{minimize, Minimization};
pub use experiment::{init_controls, run_experiment, run_single, ControlObjective, RunResult};

use crate::error::{invalid, Result};

/// Value and gradient of an objective at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// The gradient is not defined here; minimization should stop.
    pub singular: bool,
}

impl Evaluation {
    pub fn new(value: f64, gradient: Vec<f64>) -> Self {
        Self {
            value,
            gradient,
            singular: false,
        }
    }
}

/// A differentiable function of a real parameter vector.
pub trait Objective {
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> Result<Evaluation>,
{
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        self(x)
    }
}

/// Default half-width of the initial control distribution, in units of `J`.
///
/// Wider starts land the optimizer on pulses with more high-frequency content,
/// which the filter then degrades; 1.75 is where unconstrained NOT and SWAP
/// runs on three qubits drop to a post-filter fidelity of roughly 0.9.
pub const DEFAULT_INIT_AMPLITUDE: f64 = 1.75;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop once the max-norm of the gradient drops below this.
    pub grad_tolerance: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Half-width of the uniform initial amplitude distribution, in units of `J`.
    pub init_amplitude: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            grad_tolerance: 1e-8,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            init_amplitude: DEFAULT_INIT_AMPLITUDE,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(invalid(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if !(self.grad_tolerance > 0.0) {
            return Err(invalid(format!(
                "gradient tolerance {} must be positive",
                self.grad_tolerance
            )));
        }
        if !(self.init_amplitude >= 0.0 && self.init_amplitude.is_finite()) {
            return Err(invalid(format!(
                "initial amplitude {} must be non-negative",
                self.init_amplitude
            )));
        }
        Ok(())
    }
}

/// Why a minimization or run stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
    /// The fidelity overlap vanished; start again from another point.
    RestartAdvised,
    Failed(String),
}

impl Status {
    pub fn label(&self) -> &str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::LineSearchFailed => "line_search_failed",
            Status::RestartAdvised => "restart_advised",
            Status::Failed(_) => "failed",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Failed(msg) => write!(f, "failed: {msg}"),
            other => f.write_str(other.label()),
        }
    }
}
