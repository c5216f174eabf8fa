//! Line search for the strong Wolfe conditions with cubic interpolation.

use super::{Evaluation, Objective};
use crate::error::Result;

const MAX_BRACKET_STEPS: usize = 30;
const MAX_ZOOM_STEPS: usize = 40;
const MAX_STEP: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct LineSearchParams {
    pub c1: f64,
    pub c2: f64,
}

/// Accepted trial point.
#[derive(Debug, Clone)]
pub struct Step {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub eval: Evaluation,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub enum LineSearchOutcome {
    Accepted(Step),
    /// No step satisfying both conditions was found.
    Failed { evaluations: usize },
    /// The objective reported a singular point along the ray.
    Singular { evaluations: usize },
}

struct Trial {
    alpha: f64,
    value: f64,
    slope: f64,
}

struct Ray<'a, O: Objective + ?Sized> {
    objective: &'a O,
    x: &'a [f64],
    direction: &'a [f64],
    evaluations: usize,
}

impl<O: Objective + ?Sized> Ray<'_, O> {
    fn point(&self, alpha: f64) -> Vec<f64> {
        self.x
            .iter()
            .zip(self.direction)
            .map(|(x, d)| x + alpha * d)
            .collect()
    }

    fn eval(&mut self, alpha: f64) -> Result<(Trial, Vec<f64>, Evaluation)> {
        let x = self.point(alpha);
        let eval = self.objective.evaluate(&x)?;
        self.evaluations += 1;
        let slope = dot(&eval.gradient, self.direction);
        let value = if eval.value.is_finite() { eval.value } else { f64::INFINITY };
        Ok((Trial { alpha, value, slope }, x, eval))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of the cubic interpolating values and slopes at `a` and `b`,
/// clamped into the middle 80% of the interval. Falls back to bisection.
fn cubic_step(a: &Trial, b: &Trial) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let width = hi - lo;
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    let candidate = if disc >= 0.0 && b.value.is_finite() {
        let d2 = disc.sqrt().copysign(b.alpha - a.alpha);
        b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2)
    } else {
        f64::NAN
    };
    if candidate.is_finite() {
        candidate.clamp(lo + 0.1 * width, hi - 0.1 * width)
    } else {
        lo + 0.5 * width
    }
}

/// Finds `α` with `f(x+αd) ≤ f(x) + c1·α·∇f·d` and `|∇f(x+αd)·d| ≤ c2·|∇f·d|`.
///
/// `slope0 = ∇f(x)·d` must be negative.
pub fn strong_wolfe<O: Objective + ?Sized>(
    objective: &O,
    x: &[f64],
    value0: f64,
    slope0: f64,
    direction: &[f64],
    initial_step: f64,
    params: &LineSearchParams,
) -> Result<LineSearchOutcome> {
    debug_assert!(slope0 < 0.0);
    let mut ray = Ray {
        objective,
        x,
        direction,
        evaluations: 0,
    };
    let sufficient = |t: &Trial| t.value <= value0 + params.c1 * t.alpha * slope0;
    let curvature = |t: &Trial| t.slope.abs() <= -params.c2 * slope0;

    let mut prev = Trial {
        alpha: 0.0,
        value: value0,
        slope: slope0,
    };
    let mut alpha = initial_step;
    for i in 0..MAX_BRACKET_STEPS {
        let (trial, xt, eval) = ray.eval(alpha)?;
        if eval.singular {
            return Ok(LineSearchOutcome::Singular {
                evaluations: ray.evaluations,
            });
        }
        if !sufficient(&trial) || (i > 0 && trial.value >= prev.value) {
            return zoom(&mut ray, prev, trial, value0, slope0, params);
        }
        if curvature(&trial) {
            return Ok(accept(&ray, trial.alpha, xt, eval));
        }
        if trial.slope >= 0.0 {
            return zoom(&mut ray, trial, prev, value0, slope0, params);
        }
        prev = trial;
        alpha = (alpha * 2.0).min(MAX_STEP);
        if prev.alpha >= MAX_STEP {
            break;
        }
    }
    Ok(LineSearchOutcome::Failed {
        evaluations: ray.evaluations,
    })
}

fn accept<O: Objective + ?Sized>(ray: &Ray<'_, O>, alpha: f64, x: Vec<f64>, eval: Evaluation) -> LineSearchOutcome {
    LineSearchOutcome::Accepted(Step {
        alpha,
        x,
        eval,
        evaluations: ray.evaluations,
    })
}

/// `lo` satisfies sufficient decrease and has the lowest value seen;
/// `hi` is the other end of a bracket containing an acceptable step.
fn zoom<O: Objective + ?Sized>(
    ray: &mut Ray<'_, O>,
    mut lo: Trial,
    mut hi: Trial,
    value0: f64,
    slope0: f64,
    params: &LineSearchParams,
) -> Result<LineSearchOutcome> {
    for _ in 0..MAX_ZOOM_STEPS {
        if (hi.alpha - lo.alpha).abs() <= 1e-14 * lo.alpha.abs().max(hi.alpha.abs()) {
            break;
        }
        let alpha = cubic_step(&lo, &hi);
        let (trial, xt, eval) = ray.eval(alpha)?;
        if eval.singular {
            return Ok(LineSearchOutcome::Singular {
                evaluations: ray.evaluations,
            });
        }
        if trial.value > value0 + params.c1 * alpha * slope0 || trial.value >= lo.value {
            hi = trial;
        } else {
            if trial.slope.abs() <= -params.c2 * slope0 {
                return Ok(accept(ray, alpha, xt, eval));
            }
            if trial.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = trial;
        }
    }
    Ok(LineSearchOutcome::Failed {
        evaluations: ray.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic1d;

    impl Objective for Quadratic1d {
        fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
            Ok(Evaluation::new((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)]))
        }
    }

    #[test]
    fn cubic_step_exact_on_cubic() {
        // f(a) = (a − 1)², minimum at 1
        let a = Trial { alpha: 0.0, value: 1.0, slope: -2.0 };
        let b = Trial { alpha: 3.0, value: 4.0, slope: 4.0 };
        assert!((cubic_step(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn satisfies_strong_wolfe() {
        let params = LineSearchParams { c1: 1e-4, c2: 0.9 };
        for initial in [1e-3, 0.5, 1.0, 10.0, 1e4] {
            let out = strong_wolfe(&Quadratic1d, &[0.0], 9.0, -6.0, &[1.0], initial, &params).unwrap();
            let LineSearchOutcome::Accepted(step) = out else {
                panic!("line search failed from {initial}")
            };
            assert!(step.eval.value <= 9.0 + 1e-4 * step.alpha * -6.0);
            assert!(step.eval.gradient[0].abs() <= 0.9 * 6.0);
        }
    }

    #[test]
    fn tight_curvature_condition() {
        let params = LineSearchParams { c1: 1e-4, c2: 0.1 };
        let out = strong_wolfe(&Quadratic1d, &[0.0], 9.0, -6.0, &[1.0], 100.0, &params).unwrap();
        let LineSearchOutcome::Accepted(step) = out else { panic!() };
        assert!(step.eval.gradient[0].abs() <= 0.6);
    }
}
