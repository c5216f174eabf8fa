use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{minimize, Evaluation, Objective, OptimizerConfig, Status};
use crate::dynamics::ControlSequence;
use crate::error::{invalid, Result};
use crate::filter::{filtered_fidelity, FilterSpec};
use crate::spectral::{objective, ObjectiveSpec};

/// Fresh starts attempted when a run lands on a vanishing fidelity overlap.
const MAX_RESTARTS: u64 = 3;

/// Random initial controls: `hx`, `hy` i.i.d. uniform on `[−a, a]`.
///
/// Drawn from ChaCha8 seeded with `seed` (`hx` first, then `hy`), so a seed
/// fixes the sequence bit for bit on every platform.
pub fn init_controls(seed: u64, n: usize, dt: f64, amplitude: f64) -> Result<ControlSequence> {
    init_controls_on_stream(seed, 0, n, dt, amplitude)
}

fn init_controls_on_stream(
    seed: u64,
    stream: u64,
    n: usize,
    dt: f64,
    amplitude: f64,
) -> Result<ControlSequence> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(invalid(format!("amplitude {amplitude} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut draw = |_| {
        if amplitude == 0.0 {
            0.0
        } else {
            rng.random_range(-amplitude..=amplitude)
        }
    };
    let hx = (0..n).map(&mut draw).collect();
    let hy = (0..n).map(&mut draw).collect();
    ControlSequence::new(dt, hx, hy)
}

/// `G` as a function of the concatenated `[hx; hy]` vector.
#[derive(Debug, Clone, Copy)]
pub struct ControlObjective<'a> {
    pub spec: &'a ObjectiveSpec,
}

impl Objective for ControlObjective<'_> {
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let controls = ControlSequence::from_params(self.spec.dt(), x)?;
        let v = objective(self.spec, &controls)?;
        Ok(Evaluation {
            value: v.value,
            gradient: v.gradient,
            singular: v.singular,
        })
    }
}

/// Outcome of one seeded optimization followed by filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    pub final_g: f64,
    pub pre_filter_fidelity: f64,
    pub post_filter_fidelity: f64,
    pub power_x: f64,
    pub power_y: f64,
    pub controls: ControlSequence,
}

impl RunResult {
    pub fn power_total(&self) -> f64 {
        0.5 * (self.power_x + self.power_y)
    }
}

/// Minimizes `G` from the controls drawn for `seed`, then filters the result.
pub fn run_single(
    spec: &ObjectiveSpec,
    config: &OptimizerConfig,
    filter: FilterSpec,
    seed: u64,
) -> Result<RunResult> {
    let n = spec.n_slices();
    let dt = spec.dt();
    let obj = ControlObjective { spec };
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut attempt = 0;
    let outcome = loop {
        let init = init_controls_on_stream(seed, attempt, n, dt, config.init_amplitude)?;
        let out = minimize(&obj, &init.to_params(), config)?;
        iterations += out.iterations;
        evaluations += out.evaluations;
        attempt += 1;
        if out.status != Status::RestartAdvised || attempt > MAX_RESTARTS {
            break out;
        }
    };
    let controls = ControlSequence::from_params(dt, &outcome.x)?;
    let value = objective(spec, &controls)?;
    let post = filtered_fidelity(spec.system(), &controls, spec.target(), filter)?;
    Ok(RunResult {
        seed,
        iterations,
        evaluations,
        status: outcome.status,
        final_g: value.value,
        pre_filter_fidelity: value.fidelity,
        post_filter_fidelity: post,
        power_x: value.power_x,
        power_y: value.power_y,
        controls,
    })
}

fn failed_run(spec: &ObjectiveSpec, seed: u64, err: crate::Error) -> RunResult {
    let controls = ControlSequence::zeros(spec.n_slices(), spec.dt())
        .expect("spec guarantees a valid slice count and dt");
    RunResult {
        seed,
        iterations: 0,
        evaluations: 0,
        status: Status::Failed(err.to_string()),
        final_g: f64::NAN,
        pre_filter_fidelity: 0.0,
        post_filter_fidelity: 0.0,
        power_x: 0.0,
        power_y: 0.0,
        controls,
    }
}

/// Runs `n_runs` independent optimizations with seeds `config.seed + j`.
///
/// Runs execute on the rayon pool and come back in run order; each run is
/// single-threaded and deterministic, so the output does not depend on the
/// number of workers. A failing run is recorded with [`Status::Failed`]
/// instead of aborting the ensemble. `on_done` is called as runs finish, in
/// completion order.
pub fn run_experiment(
    spec: &ObjectiveSpec,
    config: &OptimizerConfig,
    filter: FilterSpec,
    n_runs: usize,
    on_done: impl Fn(&RunResult) + Sync,
) -> Result<Vec<RunResult>> {
    config.validate()?;
    if n_runs == 0 {
        return Err(invalid("need at least one run"));
    }
    Ok((0..n_runs as u64)
        .into_par_iter()
        .map(|j| {
            let seed = config.seed.wrapping_add(j);
            let result = run_single(spec, config, filter, seed)
                .unwrap_or_else(|err| failed_run(spec, seed, err));
            on_done(&result);
            result
        })
        .collect())
}
