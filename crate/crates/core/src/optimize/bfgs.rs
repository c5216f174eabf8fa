use nalgebra::{DMatrix, DVector};

use super::line_search::{dot, strong_wolfe, LineSearchOutcome, LineSearchParams};
use super::{Objective, OptimizerConfig, Status};
use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct Minimization {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    /// Objective value at the start and after every accepted iteration.
    pub trace: Vec<f64>,
}

impl Minimization {
    pub fn gradient_max_norm(&self) -> f64 {
        max_norm(&self.gradient)
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, g| m.max(g.abs()))
}

/// Dense BFGS with an inverse-Hessian update and a strong Wolfe line search.
///
/// The inverse Hessian starts as the identity and is rescaled by `sᵀy/yᵀy`
/// before the first update. Updates with non-positive curvature are skipped.
/// When a line search fails the approximation is reset to the identity once
/// before giving up.
pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    x0: &[f64],
    config: &OptimizerConfig,
) -> Result<Minimization> {
    config.validate()?;
    let dim = x0.len();
    if dim == 0 {
        return Err(invalid("cannot minimize over an empty parameter vector"));
    }
    let params = LineSearchParams {
        c1: config.wolfe_c1,
        c2: config.wolfe_c2,
    };

    let mut x = x0.to_vec();
    let first = objective.evaluate(&x)?;
    let mut value = first.value;
    let mut grad = first.gradient;
    let mut evaluations = 1;
    let mut trace = vec![value];
    let mut inv_hessian = DMatrix::<f64>::identity(dim, dim);
    let mut is_identity = true;
    let mut scaled = false;

    let finish = |x: Vec<f64>, value, gradient, iterations, evaluations, status, trace| Minimization {
        x,
        value,
        gradient,
        iterations,
        evaluations,
        status,
        trace,
    };

    if first.singular {
        return Ok(finish(x, value, grad, 0, evaluations, Status::RestartAdvised, trace));
    }

    let mut iterations = 0;
    while iterations < config.max_iterations {
        if max_norm(&grad) < config.grad_tolerance {
            return Ok(finish(x, value, grad, iterations, evaluations, Status::Converged, trace));
        }
        let g = DVector::from_column_slice(&grad);
        let mut direction: Vec<f64> = (-(&inv_hessian * &g)).iter().copied().collect();
        let mut slope = dot(&direction, &grad);
        if !(slope < 0.0) {
            inv_hessian.fill_with_identity();
            is_identity = true;
            direction = grad.iter().map(|v| -v).collect();
            slope = dot(&direction, &grad);
        }
        let initial_step = if is_identity && !scaled {
            (1.0 / max_norm(&grad)).min(1.0)
        } else {
            1.0
        };

        let outcome = strong_wolfe(objective, &x, value, slope, &direction, initial_step, &params)?;
        let step = match outcome {
            LineSearchOutcome::Accepted(step) => {
                evaluations += step.evaluations;
                step
            }
            LineSearchOutcome::Singular { evaluations: e } => {
                evaluations += e;
                return Ok(finish(x, value, grad, iterations, evaluations, Status::RestartAdvised, trace));
            }
            LineSearchOutcome::Failed { evaluations: e } => {
                evaluations += e;
                if is_identity {
                    return Ok(finish(x, value, grad, iterations, evaluations, Status::LineSearchFailed, trace));
                }
                inv_hessian.fill_with_identity();
                is_identity = true;
                scaled = false;
                continue;
            }
        };

        let s = DVector::from_iterator(dim, step.x.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(dim, step.eval.gradient.iter().zip(&grad).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() && sy > 0.0 {
            if !scaled {
                inv_hessian *= sy / y.dot(&y);
                scaled = true;
            }
            bfgs_update(&mut inv_hessian, &s, &y, sy);
            is_identity = false;
        }

        x = step.x;
        value = step.eval.value;
        grad = step.eval.gradient;
        iterations += 1;
        trace.push(value);
    }
    let status = if max_norm(&grad) < config.grad_tolerance {
        Status::Converged
    } else {
        Status::MaxIterations
    };
    Ok(finish(x, value, grad, iterations, evaluations, status, trace))
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/sᵀy`, expanded to
/// rank-two updates so the cost stays quadratic.
fn bfgs_update(h: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, sy: f64) {
    let rho = 1.0 / sy;
    let hy = &*h * y;
    let yhy = y.dot(&hy);
    // H += ρ(1 + ρ yᵀHy) s sᵀ − ρ (Hy sᵀ + s (Hy)ᵀ)
    h.ger(rho * (1.0 + rho * yhy), s, s, 1.0);
    h.ger(-rho, &hy, s, 1.0);
    h.ger(-rho, s, &hy, 1.0);
}
