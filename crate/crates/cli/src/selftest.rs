//! Numerical self-checks against independent oracles.
//!
//! Each check draws its random instances from a fixed seed, so a failure is
//! reproducible. Gradients are compared with Richardson-extrapolated central
//! differences; plain central differences carry rounding noise near 1e-9 and
//! cannot resolve the 1e-6 relative tolerance on small gradient entries.

use std::f64::consts::PI;

use quadrature::double_exponential;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectral_control::dynamics::{propagate, ControlSequence};
use spectral_control::filter::{cutoff_from_band, filtered_control, sine_integral, FilterSpec};
use spectral_control::model::{GateKind, SpinChainSystem, TargetGate};
use spectral_control::optimize::{run_experiment, OptimizerConfig};
use spectral_control::spectral::{dft, objective, power_fraction, ObjectiveSpec, SpectralBand};
use spectral_control::unitarity_error;

use crate::error::{CliError, Result};
use crate::tables::results_table;

const SEED: u64 = 0x5eed;
pub const GRADIENT_INSTANCES: usize = 50;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const PARSEVAL_TOLERANCE: f64 = 1e-10;
pub const UNITARITY_TOLERANCE: f64 = 1e-10;
pub const SI_TOLERANCE: f64 = 1e-10;
pub const CONVOLUTION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn from_error(name: &'static str, err: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} {}: {}", self.name, self.detail)
    }
}

/// Power-fraction gradient under test, `(h, band) -> ∇P`.
pub type PowerGradientFn<'a> = &'a dyn Fn(&[f64], SpectralBand) -> spectral_control::Result<Vec<f64>>;

fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[k] += h;
    let fp = f(&p);
    p[k] -= 2.0 * h;
    (fp - f(&p)) / (2.0 * h)
}

/// Central differences at `h` and `h/2`, Richardson-extrapolated to O(h⁴).
pub fn richardson_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let coarse = central_difference(f, x, k, h);
            let fine = central_difference(f, x, k, 0.5 * h);
            (4.0 * fine - coarse) / 3.0
        })
        .collect()
}

/// `‖a − b‖₂ / ‖b‖₂`, or the absolute norm when `b` vanishes.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-a..=a)).collect()
}

fn random_controls(rng: &mut ChaCha8Rng, n: usize, dt: f64, a: f64) -> ControlSequence {
    let hx = uniform(rng, n, a);
    let hy = uniform(rng, n, a);
    ControlSequence::new(dt, hx, hy).expect("positive dt and matching lengths")
}

fn random_spec(rng: &mut ChaCha8Rng) -> spectral_control::Result<ObjectiveSpec> {
    let qubits = rng.random_range(1..=3);
    let n = 2 * rng.random_range(2..=8);
    let kind = if qubits >= 2 && rng.random_bool(0.5) {
        GateKind::Swap
    } else {
        GateKind::Not
    };
    let delta = rng.random_range(0..n / 2);
    ObjectiveSpec::new(
        rng.random_range(0.0..=1.0),
        SpectralBand::new(n, delta)?,
        SpinChainSystem::with_unit_coupling(qubits)?,
        TargetGate::build(kind, qubits)?,
        rng.random_range(0.05..0.5),
    )
}

/// Analytic gradient of `G` against finite differences on random instances.
pub fn check_objective_gradient(instances: usize) -> Check {
    const NAME: &str = "objective gradient vs finite differences";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let spec = match random_spec(&mut rng) {
            Ok(s) => s,
            Err(e) => return Check::from_error(NAME, e),
        };
        let controls = random_controls(&mut rng, spec.n_slices(), spec.dt(), 1.5);
        let analytic = match objective(&spec, &controls) {
            Ok(v) => v.gradient,
            Err(e) => return Check::from_error(NAME, e),
        };
        let dt = spec.dt();
        let g = |x: &[f64]| {
            let c = ControlSequence::from_params(dt, x).expect("length is even");
            objective(&spec, &c).map_or(f64::NAN, |v| v.value)
        };
        let numeric = richardson_gradient(&g, &controls.to_params(), 1e-3);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Check::new(
        NAME,
        worst < GRADIENT_TOLERANCE,
        format!("{instances} instances, worst relative error {worst:.2e} (limit {GRADIENT_TOLERANCE:.0e})"),
    )
}

/// `grad` against finite differences of the power fraction.
pub fn check_power_gradient(grad: PowerGradientFn<'_>, instances: usize) -> Check {
    const NAME: &str = "power gradient vs finite differences";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = 2 * rng.random_range(2..=32);
        let band = SpectralBand::new(n, rng.random_range(0..n / 2)).expect("delta < n/2");
        let h = uniform(&mut rng, n, 1.0);
        let analytic = match grad(&h, band) {
            Ok(g) => g,
            Err(e) => return Check::from_error(NAME, e),
        };
        let p = |x: &[f64]| power_fraction(x, band).unwrap_or(f64::NAN);
        let numeric = richardson_gradient(&p, &h, 1e-3);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Check::new(
        NAME,
        worst < GRADIENT_TOLERANCE,
        format!("{instances} instances, worst relative error {worst:.2e} (limit {GRADIENT_TOLERANCE:.0e})"),
    )
}

/// `P ∈ [0, 1]` and `∇P ⊥ h` (P is scale invariant).
pub fn check_power_properties(grad: PowerGradientFn<'_>, instances: usize) -> Check {
    const NAME: &str = "power fraction bounds and scale invariance";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let mut worst_dot = 0.0f64;
    for _ in 0..instances {
        let n = 2 * rng.random_range(1..=64);
        let band = SpectralBand::new(n, rng.random_range(0..n / 2)).expect("delta < n/2");
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let h = uniform(&mut rng, n, scale);
        let (p, g) = match (power_fraction(&h, band), grad(&h, band)) {
            (Ok(p), Ok(g)) => (p, g),
            (Err(e), _) | (_, Err(e)) => return Check::from_error(NAME, e),
        };
        if !(0.0..=1.0).contains(&p) {
            return Check::new(NAME, false, format!("P = {p} outside [0, 1] for n = {n}"));
        }
        let dot: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
        let norms = g.iter().map(|v| v * v).sum::<f64>().sqrt() * h.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norms > 0.0 {
            worst_dot = worst_dot.max(dot.abs() / norms);
        }
    }
    Check::new(
        NAME,
        worst_dot < 1e-10,
        format!("{instances} signals, worst |<grad P, h>|/(|grad P||h|) = {worst_dot:.2e}"),
    )
}

/// Unitary DFT preserves the squared norm.
pub fn check_parseval(instances: usize) -> Check {
    const NAME: &str = "Parseval identity";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=1024);
        let h = uniform(&mut rng, n, 1.0);
        let time: f64 = h.iter().map(|v| v * v).sum();
        let freq: f64 = dft(&h).iter().map(|c| c.norm_sqr()).sum();
        if time > 0.0 {
            worst = worst.max((freq - time).abs() / time);
        }
    }
    Check::new(
        NAME,
        worst < PARSEVAL_TOLERANCE,
        format!("{instances} signals, worst relative error {worst:.2e}"),
    )
}

/// Every slice propagator and running product is unitary.
pub fn check_unitarity(instances: usize) -> Check {
    const NAME: &str = "propagator unitarity";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let qubits = rng.random_range(1..=4);
        let sys = SpinChainSystem::with_unit_coupling(qubits).expect("qubit count in range");
        let n = rng.random_range(1..=32);
        let dt = rng.random_range(0.01..1.0);
        let controls = random_controls(&mut rng, n, dt, 5.0);
        let prop = match propagate(&sys, &controls) {
            Ok(p) => p,
            Err(e) => return Check::from_error(NAME, e),
        };
        for u in prop.slice_unitaries.iter().chain(&prop.prefix_products) {
            worst = worst.max(unitarity_error(u));
        }
    }
    Check::new(
        NAME,
        worst < UNITARITY_TOLERANCE,
        format!("{instances} sequences, worst |U†U − I| = {worst:.2e}"),
    )
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        t.sin() / t
    }
}

/// `∫₀ˣ sin t / t dt` by double-exponential quadrature over half periods.
pub fn si_quadrature(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    let pieces = (x / PI).ceil().max(1.0) as usize;
    let width = x / pieces as f64;
    let sum: f64 = (0..pieces)
        .map(|k| {
            let a = k as f64 * width;
            double_exponential::integrate(sinc, a, a + width, 1e-15).integral
        })
        .sum();
    sign * sum
}

/// Sine integral against quadrature.
pub fn check_sine_integral() -> Check {
    const NAME: &str = "sine integral vs quadrature";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    let mut points = vec![0.0, 1e-8, 0.5, 1.0, PI, 4.0, 4.0 + 1e-12, 10.0, 25.0, 60.0];
    points.extend((0..40).map(|_| rng.random_range(-80.0..80.0)));
    let worst = points
        .iter()
        .map(|&x| (sine_integral(x) - si_quadrature(x)).abs())
        .fold(0.0, f64::max);
    Check::new(
        NAME,
        worst < SI_TOLERANCE,
        format!("{} points, worst absolute error {worst:.2e}", points.len()),
    )
}

/// Filtered value at `t` by direct quadrature of the impulse response over
/// each slice.
pub fn convolution_quadrature(controls: &ControlSequence, omega0: f64, t: f64) -> (f64, f64) {
    let dt = controls.dt();
    let kernel = |s: f64| omega0 / PI * sinc(omega0 * (s - t));
    let mut x = 0.0;
    let mut y = 0.0;
    for (i, (hx, hy)) in controls.hx().iter().zip(controls.hy()).enumerate() {
        let (a, b) = (i as f64 * dt, (i + 1) as f64 * dt);
        let w = if a < t && t < b {
            double_exponential::integrate(kernel, a, t, 1e-14).integral
                + double_exponential::integrate(kernel, t, b, 1e-14).integral
        } else {
            double_exponential::integrate(kernel, a, b, 1e-14).integral
        };
        x += hx * w;
        y += hy * w;
    }
    (x, y)
}

/// Closed-form filtered controls against direct convolution.
pub fn check_filter_convolution(instances: usize) -> Check {
    const NAME: &str = "filtered control vs convolution quadrature";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = 2 * rng.random_range(2..=16);
        let dt = rng.random_range(0.05..0.5);
        let band = SpectralBand::new(n, rng.random_range(0..n / 2)).expect("delta < n/2");
        let omega0 = match cutoff_from_band(band, dt) {
            Ok(w) => w,
            Err(e) => return Check::from_error(NAME, e),
        };
        let controls = random_controls(&mut rng, n, dt, 2.0);
        for _ in 0..4 {
            let t = rng.random_range(0.0..=controls.duration());
            let (fx, fy) = match filtered_control(&controls, omega0, t) {
                Ok(v) => v,
                Err(e) => return Check::from_error(NAME, e),
            };
            let (qx, qy) = convolution_quadrature(&controls, omega0, t);
            worst = worst.max((fx - qx).abs()).max((fy - qy).abs());
        }
    }
    Check::new(
        NAME,
        worst < CONVOLUTION_TOLERANCE,
        format!("{instances} sequences, worst absolute error {worst:.2e}"),
    )
}

/// A small seeded ensemble run twice gives byte-identical results tables.
pub fn check_determinism() -> Check {
    const NAME: &str = "fixed seed reproduces outputs";
    let run = || -> spectral_control::Result<String> {
        let spec = ObjectiveSpec::new(
            0.5,
            SpectralBand::quarter(8)?,
            SpinChainSystem::with_unit_coupling(2)?,
            TargetGate::build(GateKind::Swap, 2)?,
            0.2,
        )?;
        let config = OptimizerConfig {
            max_iterations: 40,
            seed: 11,
            ..OptimizerConfig::default()
        };
        let filter = FilterSpec::from_band(spec.band(), spec.dt(), 4)?;
        let runs = run_experiment(&spec, &config, filter, 4, |_| {})?;
        Ok(results_table(&[("seed".into(), "11".into())], &runs))
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => Check::new(NAME, a == b, format!("{} bytes compared", a.len())),
        (Err(e), _) | (_, Err(e)) => Check::from_error(NAME, e),
    }
}

/// All checks, using `power_gradient` wherever the power gradient is needed.
pub fn run_checks(power_gradient: PowerGradientFn<'_>) -> Vec<Check> {
    vec![
        check_objective_gradient(GRADIENT_INSTANCES),
        check_power_gradient(power_gradient, GRADIENT_INSTANCES),
        check_power_properties(power_gradient, 200),
        check_parseval(200),
        check_unitarity(100),
        check_sine_integral(),
        check_filter_convolution(20),
        check_determinism(),
    ]
}

/// Runs every check with the library's power gradient.
pub fn default_checks() -> Vec<Check> {
    run_checks(&spectral_control::spectral::power_gradient)
}

/// `Ok` when every check passed, otherwise the names of the failures.
pub fn verdict(checks: &[Check]) -> Result<()> {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelftestFailed(failed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn si_quadrature_reference_values() {
        assert!((si_quadrature(PI) - 1.851_937_051_982_466).abs() < 1e-13);
        assert!((si_quadrature(-1.0) + 0.946_083_070_367_183).abs() < 1e-13);
        assert_eq!(si_quadrature(0.0), 0.0);
    }

    #[test]
    fn sign_flipped_power_gradient_is_caught() {
        let flipped = |h: &[f64], band: SpectralBand| {
            spectral_control::spectral::power_gradient(h, band)
                .map(|g| g.into_iter().map(|v| -v).collect())
        };
        let check = check_power_gradient(&flipped, 5);
        assert!(!check.passed, "{check}");
        assert!(check_power_gradient(&spectral_control::spectral::power_gradient, 5).passed);
    }

    #[test]
    fn verdict_names_failures() {
        let checks = vec![
            Check::new("a", true, String::new()),
            Check::new("b", false, String::new()),
        ];
        match verdict(&checks) {
            Err(CliError::SelftestFailed(names)) => assert_eq!(names, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
    }
}
