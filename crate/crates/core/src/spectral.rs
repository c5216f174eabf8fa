//! High-frequency power penalty and the combined objective
//! `G = (1−μ)·P − μ·F`.
//!
//! The DFT is unitary, `y = Q h` with `Q_kl = n^{−1/2} e^{+2πi kl/n}`. The
//! penalized band is the block of indices `n/2−Δ ..= n/2+Δ` around the
//! Nyquist index, i.e. every frequency of magnitude at least `n/2−Δ` cycles
//! per window. Both controls are penalized separately and their fractions
//! averaged, `P = (P_x + P_y)/2`, which keeps `P` in `[0, 1]`. Penalizing the
//! joint `2n` vector instead would weight the directions by their power.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::dynamics::{fidelity_gradient, total_propagator, gate_fidelity, ControlSequence};
use crate::error::{invalid, Result};
use crate::model::{SpinChainSystem, TargetGate};

/// Signals with `|h|²` below this have no defined power fraction.
pub const ZERO_SIGNAL: f64 = 1e-300;

/// Indices `n/2 − Δ ..= n/2 + Δ` of a length-`n` spectrum, clipped to
/// `n − 1` (so `Δ = n/2` covers every index once).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralBand {
    n: usize,
    delta: usize,
}

impl SpectralBand {
    pub fn new(n: usize, delta: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(invalid(format!("band needs an even, positive signal length, got {n}")));
        }
        if delta > n / 2 {
            return Err(invalid(format!("band half-width {delta} exceeds n/2 = {}", n / 2)));
        }
        Ok(Self { n, delta })
    }

    /// `Δ = n/4`: the upper half of the spectrum.
    pub fn quarter(n: usize) -> Result<Self> {
        Self::new(n, n / 4)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        (self.n / 2 - self.delta)..=(self.n / 2 + self.delta).min(self.n - 1)
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices().contains(&k)
    }

    pub fn width(&self) -> usize {
        self.indices().count()
    }
}

/// Band power of one control vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFraction {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Zero input; `value` and `gradient` are reported as zero.
    pub degenerate: bool,
}

/// Cached transforms for evaluating the band power of length-`n` signals.
#[derive(Clone)]
pub struct BandPower {
    band: SpectralBand,
    // e^{+2πi kl/n}, the direction of `Q`
    positive: Arc<dyn Fft<f64>>,
    // e^{−2πi kl/n}, the direction of `conj(Q)` used by the gradient
    negative: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for BandPower {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BandPower").field("band", &self.band).finish()
    }
}

impl BandPower {
    pub fn new(band: SpectralBand) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            band,
            positive: planner.plan_fft(band.n(), FftDirection::Inverse),
            negative: planner.plan_fft(band.n(), FftDirection::Forward),
        }
    }

    pub fn band(&self) -> SpectralBand {
        self.band
    }

    fn transform(&self, h: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = h.iter().map(|&v| Complex64::from(v)).collect();
        self.positive.process(&mut buf);
        let norm = 1.0 / (h.len() as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= norm);
        buf
    }

    /// `P(h)` and `∂P/∂h`.
    ///
    /// With `S = Σ_band |y_k|²` and `|y|² = |h|²`,
    /// `∂|y_k|²/∂h_l = (2/√n)·Re(e^{−2πi kl/n} y_k)` and
    /// `∂P/∂h_l = (∂S/∂h_l − 2P·h_l) / |h|²`.
    pub fn evaluate(&self, h: &[f64]) -> Result<PowerFraction> {
        let n = self.band.n();
        if h.len() != n {
            return Err(invalid(format!("signal has length {}, band expects {n}", h.len())));
        }
        let total: f64 = h.iter().map(|v| v * v).sum();
        if total < ZERO_SIGNAL {
            return Ok(PowerFraction {
                value: 0.0,
                gradient: vec![0.0; n],
                degenerate: true,
            });
        }
        let y = self.transform(h);
        let mut masked = vec![Complex64::new(0.0, 0.0); n];
        let mut in_band = 0.0;
        for k in self.band.indices() {
            in_band += y[k].norm_sqr();
            masked[k] = y[k];
        }
        let value = (in_band / total).clamp(0.0, 1.0);
        self.negative.process(&mut masked);
        let scale = 2.0 / (n as f64).sqrt();
        let gradient = masked
            .iter()
            .zip(h)
            .map(|(s, &hl)| (scale * s.re - 2.0 * value * hl) / total)
            .collect();
        Ok(PowerFraction {
            value,
            gradient,
            degenerate: false,
        })
    }
}

/// Unitary DFT `y = Q h`, `Q_kl = n^{−1/2} e^{2πi kl/n}`.
pub fn dft(h: &[f64]) -> Vec<Complex64> {
    if h.is_empty() {
        return Vec::new();
    }
    let plan = FftPlanner::new().plan_fft(h.len(), FftDirection::Inverse);
    let mut buf: Vec<Complex64> = h.iter().map(|&v| Complex64::from(v)).collect();
    plan.process(&mut buf);
    let norm = 1.0 / (h.len() as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= norm);
    buf
}

/// Share of `|y|²` inside the band; zero for the zero signal.
pub fn power_fraction(h: &[f64], band: SpectralBand) -> Result<f64> {
    Ok(BandPower::new(band).evaluate(h)?.value)
}

/// Gradient of [`power_fraction`]; zero for the zero signal.
pub fn power_gradient(h: &[f64], band: SpectralBand) -> Result<Vec<f64>> {
    Ok(BandPower::new(band).evaluate(h)?.gradient)
}

/// Everything needed to evaluate `G` for a control sequence.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    mu: f64,
    power: BandPower,
    system: SpinChainSystem,
    target: TargetGate,
    dt: f64,
}

impl ObjectiveSpec {
    pub fn new(
        mu: f64,
        band: SpectralBand,
        system: SpinChainSystem,
        target: TargetGate,
        dt: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(invalid(format!("mu = {mu} outside [0, 1]")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("dt = {dt} must be positive")));
        }
        if system.dim() != target.dim() {
            return Err(invalid(format!(
                "target acts on {} qubits but the chain has {}",
                target.n_qubits(),
                system.n_qubits()
            )));
        }
        Ok(Self {
            mu,
            power: BandPower::new(band),
            system,
            target,
            dt,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn band(&self) -> SpectralBand {
        self.power.band()
    }

    pub fn n_slices(&self) -> usize {
        self.power.band().n()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn system(&self) -> &SpinChainSystem {
        &self.system
    }

    pub fn target(&self) -> &TargetGate {
        &self.target
    }

    pub fn band_power(&self) -> &BandPower {
        &self.power
    }
}

/// `G` and its gradient over `[hx; hy]`, with the parts it was built from.
#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub fidelity: f64,
    pub power_x: f64,
    pub power_y: f64,
    /// The fidelity overlap vanished; its gradient contribution is zero.
    pub singular: bool,
    /// One of the control vectors was identically zero.
    pub degenerate: bool,
}

impl ObjectiveValue {
    pub fn power_total(&self) -> f64 {
        0.5 * (self.power_x + self.power_y)
    }
}

/// `G = (1−μ)·(P_x + P_y)/2 − μ·F`.
pub fn objective(spec: &ObjectiveSpec, controls: &ControlSequence) -> Result<ObjectiveValue> {
    let n = spec.n_slices();
    if controls.len() != n {
        return Err(invalid(format!("expected {n} slices, got {}", controls.len())));
    }
    let px = spec.power.evaluate(controls.hx())?;
    let py = spec.power.evaluate(controls.hy())?;
    let mu = spec.mu;

    let (fidelity, fid_grad, singular) = if mu > 0.0 {
        let fg = fidelity_gradient(&spec.system, controls, &spec.target)?;
        let grad: Vec<f64> = fg.grad_x.into_iter().chain(fg.grad_y).collect();
        (fg.fidelity, grad, fg.singular)
    } else {
        let u = total_propagator(&spec.system, controls)?;
        (gate_fidelity(&spec.target, &u)?, vec![0.0; 2 * n], false)
    };

    let weight = 0.5 * (1.0 - mu);
    let value = weight * (px.value + py.value) - mu * fidelity;
    let gradient = px
        .gradient
        .iter()
        .chain(&py.gradient)
        .zip(&fid_grad)
        .map(|(dp, df)| weight * dp - mu * df)
        .collect();
    Ok(ObjectiveValue {
        value,
        gradient,
        fidelity,
        power_x: px.value,
        power_y: py.value,
        singular,
        degenerate: px.degenerate || py.degenerate,
    })
}
