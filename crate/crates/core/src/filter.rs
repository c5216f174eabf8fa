//! Ideal low-pass filtering of piecewise-constant controls.
//!
//! The filter keeps angular frequencies in `[−ω₀, ω₀]`. Its impulse response
//! is `sin(ω₀u)/(πu)`, and convolving it with a rectangle on `[a, b]` gives
//! `(Si(ω₀(b−t)) − Si(ω₀(a−t)))/π`. A control sequence (zero outside its
//! window `[0, n·dt]`) is therefore filtered exactly by summing those terms
//! over its slices.
//!
//! The filtered signal is evaluated inside the window only; the ringing tails
//! outside it are dropped.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::dynamics::{gate_fidelity, total_propagator, ControlSequence};
use crate::error::{invalid, Result};
use crate::model::{SpinChainSystem, TargetGate};
use crate::spectral::SpectralBand;

pub const DEFAULT_OVERSAMPLE: usize = 16;

/// Sine integral `Si(x) = ∫₀ˣ sin t / t dt`.
///
/// Power series for `|x| ≤ 4`; above that, `Si(x) = π/2 + Im(e^{−ix}·E₁(ix)·…)`
/// via the continued fraction of the exponential integral on the imaginary
/// axis, evaluated with the modified Lentz method. Both branches are accurate
/// to a few ulps of `π/2`.
pub fn sine_integral(x: f64) -> f64 {
    let t = x.abs();
    let value = if t <= 4.0 {
        si_series(t)
    } else {
        si_continued_fraction(t)
    };
    value.copysign(x)
}

fn si_series(t: f64) -> f64 {
    // Σ (−1)^k t^{2k+1} / ((2k+1)·(2k+1)!)
    let t2 = t * t;
    let mut term = t; // (−1)^k t^{2k+1}/(2k+1)!
    let mut sum = t;
    for k in 1..40 {
        let m = (2 * k) as f64;
        term *= -t2 / (m * (m + 1.0));
        let contrib = term / (m + 1.0);
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn si_continued_fraction(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = Complex64::new(1.0, t);
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..200 {
        let a = -(((i - 1) * (i - 1)) as f64);
        b += Complex64::from(2.0);
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h *= Complex64::new(t.cos(), -t.sin());
    FRAC_PI_2 + h.im
}

/// Angular frequency of the lowest DFT index inside the penalized band,
/// `ω₀ = 2π(n/2 − Δ)/(n·dt)`.
pub fn cutoff_from_band(band: SpectralBand, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt = {dt} must be positive")));
    }
    let n = band.n();
    let lowest = n / 2 - band.delta();
    if lowest == 0 {
        return Err(invalid("band covers the whole spectrum; cutoff would be zero"));
    }
    Ok(2.0 * PI * lowest as f64 / (n as f64 * dt))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    omega0: f64,
    oversample: usize,
}

impl FilterSpec {
    pub fn new(omega0: f64, oversample: usize) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(invalid(format!("cutoff {omega0} must be positive and finite")));
        }
        if oversample == 0 {
            return Err(invalid("oversample must be at least 1"));
        }
        Ok(Self { omega0, oversample })
    }

    pub fn from_band(band: SpectralBand, dt: f64, oversample: usize) -> Result<Self> {
        Self::new(cutoff_from_band(band, dt)?, oversample)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }
}

/// Slice-boundary terms `Si(ω₀(j·dt − t))`, `j = 0..=n`.
fn boundary_terms(n: usize, dt: f64, omega0: f64, t: f64) -> Vec<f64> {
    (0..=n)
        .map(|j| sine_integral(omega0 * (j as f64 * dt - t)))
        .collect()
}

fn combine(amplitudes: &[f64], terms: &[f64]) -> f64 {
    amplitudes
        .iter()
        .zip(terms.windows(2))
        .map(|(h, w)| h * (w[1] - w[0]))
        .sum::<f64>()
        / PI
}

/// Filtered `(hx, hy)` at time `t`, where slice `i` (1-based) occupies
/// `[(i−1)·dt, i·dt]`.
pub fn filtered_control(controls: &ControlSequence, omega0: f64, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=controls.duration()).contains(&t) {
        return Err(invalid(format!(
            "t = {t} outside the control window [0, {}]",
            controls.duration()
        )));
    }
    let terms = boundary_terms(controls.len(), controls.dt(), omega0, t);
    Ok((combine(controls.hx(), &terms), combine(controls.hy(), &terms)))
}

/// Filtered controls sampled at the midpoints of `n·oversample` sub-slices.
pub fn filtered_sequence(controls: &ControlSequence, filter: FilterSpec) -> Result<ControlSequence> {
    let n = controls.len();
    let dt = controls.dt();
    let os = filter.oversample();
    let sub = dt / os as f64;
    let samples = n * os;
    let mut hx = Vec::with_capacity(samples);
    let mut hy = Vec::with_capacity(samples);
    for s in 0..samples {
        let t = (s as f64 + 0.5) * sub;
        let terms = boundary_terms(n, dt, filter.omega0(), t);
        hx.push(combine(controls.hx(), &terms));
        hy.push(combine(controls.hy(), &terms));
    }
    ControlSequence::new(sub, hx, hy)
}

/// Gate fidelity reached by the filtered controls.
pub fn filtered_fidelity(
    sys: &SpinChainSystem,
    controls: &ControlSequence,
    target: &TargetGate,
    filter: FilterSpec,
) -> Result<f64> {
    let smooth = filtered_sequence(controls, filter)?;
    gate_fidelity(target, &total_propagator(sys, &smooth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate;
    use crate::model::target_not;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Adaptive Simpson quadrature.
    fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                left + right + delta / 15.0
            } else {
                step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn sinc(t: f64) -> f64 {
        if t == 0.0 {
            1.0
        } else {
            t.sin() / t
        }
    }

    fn si_quadrature(x: f64) -> f64 {
        // split into unit pieces to keep the recursion shallow
        let pieces = x.abs().ceil().max(1.0) as usize;
        let h = x / pieces as f64;
        (0..pieces)
            .map(|k| integrate(&sinc, k as f64 * h, (k + 1) as f64 * h, 1e-15))
            .sum()
    }

    #[test]
    fn si_at_zero_and_pi() {
        assert_eq!(sine_integral(0.0), 0.0);
        let oracle = si_quadrature(PI);
        assert!((oracle - 1.851_937_051_982_466).abs() < 1e-12);
        assert!((sine_integral(PI) - oracle).abs() < 1e-12);
    }

    #[test]
    fn si_is_odd_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = rng.random_range(-500.0..500.0);
            assert_eq!(sine_integral(-x), -sine_integral(x));
            // the global maximum is Si(π) ≈ π/2 + 0.281
            assert!(sine_integral(x).abs() <= sine_integral(PI));
        }
    }

    #[test]
    fn si_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut xs: Vec<f64> = vec![1e-8, 0.5, 2.0, 3.999, 4.0, 4.001, 8.0, 16.0, 30.0, 100.0];
        xs.extend((0..30).map(|_| rng.random_range(0.0..60.0)));
        for x in xs {
            let oracle = si_quadrature(x);
            assert!((sine_integral(x) - oracle).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn si_large_argument_asymptote() {
        // Si(x) ≈ π/2 − cos x / x − sin x / x² for large x
        for x in [1e3f64, 1e5, 1e8] {
            let approx = FRAC_PI_2 - x.cos() / x - x.sin() / (x * x);
            assert!((sine_integral(x) - approx).abs() < 3.0 / (x * x * x) + 1e-15);
        }
    }

    #[test]
    fn cutoff_values() {
        let band = SpectralBand::quarter(128).unwrap();
        let w = cutoff_from_band(band, 0.2).unwrap();
        assert!((w - PI / 0.4).abs() < 1e-14);
        let w4 = cutoff_from_band(SpectralBand::quarter(512).unwrap(), 0.2).unwrap();
        assert!((w4 - PI / 0.4).abs() < 1e-14);
        let nyquist = cutoff_from_band(SpectralBand::new(128, 0).unwrap(), 0.2).unwrap();
        assert!((nyquist - PI / 0.2).abs() < 1e-14);
        assert!(cutoff_from_band(SpectralBand::new(128, 64).unwrap(), 0.2).is_err());
        assert!(FilterSpec::new(0.0, 4).is_err());
        assert!(FilterSpec::new(1.0, 0).is_err());
    }

    #[test]
    fn zero_controls_filter_to_zero() {
        let c = ControlSequence::zeros(16, 0.2).unwrap();
        for t in [0.0, 0.1, 1.6, 3.2] {
            assert_eq!(filtered_control(&c, 5.0, t).unwrap(), (0.0, 0.0));
        }
        assert!(filtered_control(&c, 5.0, 3.3).is_err());
        assert!(filtered_control(&c, 5.0, -0.1).is_err());
    }

    /// `∫_a^b sin(ω₀(t−s))/(π(t−s)) ds` by quadrature.
    fn rectangle_convolution(a: f64, b: f64, omega0: f64, t: f64) -> f64 {
        let kernel = |s: f64| omega0 / PI * sinc(omega0 * (t - s));
        let pieces = ((b - a) * omega0).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| integrate(&kernel, a + k as f64 * h, a + (k + 1) as f64 * h, 1e-14))
            .sum()
    }

    #[test]
    fn constant_pulse_with_wide_band() {
        let dt = 0.2;
        let n = 20;
        let omega0 = 100.0 / dt;
        let c = ControlSequence::new(dt, vec![1.7; n], vec![-0.4; n]).unwrap();
        let t = 0.5 * c.duration();
        let (hx, hy) = filtered_control(&c, omega0, t).unwrap();
        let oracle = 1.7 * rectangle_convolution(0.0, c.duration(), omega0, t);
        assert!((hx - oracle).abs() < 1e-8);
        assert!((hx - 1.7).abs() < 1e-2 * 1.7);
        assert!((hy + 0.4).abs() < 1e-2 * 0.4);
    }

    #[test]
    fn single_slice_matches_convolution_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dt = 0.2;
        let n = 10;
        for _ in 0..20 {
            let slice = rng.random_range(0..n);
            let amp = rng.random_range(-2.0..2.0);
            let omega0 = rng.random_range(1.0..20.0);
            let mut hx = vec![0.0; n];
            hx[slice] = amp;
            let c = ControlSequence::new(dt, hx, vec![0.0; n]).unwrap();
            let t = rng.random_range(0.0..c.duration());
            let (got, zero) = filtered_control(&c, omega0, t).unwrap();
            let a = slice as f64 * dt;
            let oracle = amp * rectangle_convolution(a, a + dt, omega0, t);
            assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
            assert_eq!(zero, 0.0);
        }
    }

    #[test]
    fn filtering_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 24;
        let mut draw = || (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (h1, h2, g1, g2) = (draw(), draw(), draw(), draw());
        let (a, b) = (0.7, -1.3);
        let c1 = ControlSequence::new(0.2, h1.clone(), g1.clone()).unwrap();
        let c2 = ControlSequence::new(0.2, h2.clone(), g2.clone()).unwrap();
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        let c = ControlSequence::new(0.2, mix(&h1, &h2), mix(&g1, &g2)).unwrap();
        for k in 0..=20 {
            let t = c.duration() * k as f64 / 20.0;
            let (x1, y1) = filtered_control(&c1, 7.0, t).unwrap();
            let (x2, y2) = filtered_control(&c2, 7.0, t).unwrap();
            let (x, y) = filtered_control(&c, 7.0, t).unwrap();
            assert!((x - (a * x1 + b * x2)).abs() < 1e-10);
            assert!((y - (a * y1 + b * y2)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_controls_keep_fidelity() {
        let sys = SpinChainSystem::with_unit_coupling(3).unwrap();
        let target = target_not(3).unwrap();
        let c = ControlSequence::zeros(32, 0.2).unwrap();
        let filter = FilterSpec::new(3.0, 4).unwrap();
        let before = gate_fidelity(&target, &propagate(&sys, &c).unwrap().total).unwrap();
        let after = filtered_fidelity(&sys, &c, &target, filter).unwrap();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn very_wide_filter_preserves_fidelity() {
        let sys = SpinChainSystem::with_unit_coupling(3).unwrap();
        let target = target_not(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 32;
        let hx = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hy = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = ControlSequence::new(0.2, hx, hy).unwrap();
        let before = gate_fidelity(&target, &propagate(&sys, &c).unwrap().total).unwrap();
        let after = filtered_fidelity(&sys, &c, &target, FilterSpec::new(1e4, 16).unwrap()).unwrap();
        assert!((before - after).abs() < 1e-3, "{before} vs {after}");
    }

    #[test]
    fn oversample_convergence() {
        let sys = SpinChainSystem::with_unit_coupling(3).unwrap();
        let target = target_not(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 64;
        let band = SpectralBand::quarter(n).unwrap();
        for _ in 0..4 {
            let hx = (0..n).map(|_| rng.random_range(-1.75..1.75)).collect();
            let hy = (0..n).map(|_| rng.random_range(-1.75..1.75)).collect();
            let c = ControlSequence::new(0.2, hx, hy).unwrap();
            let f = |os| filtered_fidelity(&sys, &c, &target, FilterSpec::from_band(band, 0.2, os).unwrap()).unwrap();
            let values: Vec<f64> = [4, 8, 16, 32, 64].into_iter().map(f).collect();
            let steps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            assert!(steps.windows(2).all(|s| s[1] < s[0]), "{steps:?}");
            assert!(steps[2] < 1e-4, "{steps:?}");
        }
    }
}
