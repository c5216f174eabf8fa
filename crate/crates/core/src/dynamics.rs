//! Piecewise-constant propagation, gate fidelity and its exact gradient.
//!
//! Slice `i` (1-based) occupies `[(i−1)·dt, i·dt]` and evolves under
//! `H_i = H₀ + hx_i·Sx¹ + hy_i·Sy¹`. The total propagator is
//! `U = U_n ··· U_2 · U_1`, so slice 1 acts first.
//!
//! Every slice exponential is taken through a Hermitian eigendecomposition.
//! The same decomposition gives the exact derivative of the exponential via
//! the divided-difference (Daleckii–Krein) formula, so gradients carry no
//! small-`dt` approximation.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{SpinChainSystem, TargetGate};
use crate::CMatrix;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 1000;

/// Below this `|Tr(U_T† U)|` the fidelity is not differentiable.
pub const SINGULAR_OVERLAP: f64 = 1e-14;

/// Piecewise-constant `(hx, hy)` amplitudes on `n` slices of length `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    dt: f64,
    hx: Vec<f64>,
    hy: Vec<f64>,
}

impl ControlSequence {
    pub fn new(dt: f64, hx: Vec<f64>, hy: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("slice duration {dt} must be positive and finite")));
        }
        if hx.is_empty() {
            return Err(invalid("control sequence needs at least one slice"));
        }
        if hx.len() != hy.len() {
            return Err(invalid(format!(
                "hx has {} slices but hy has {}",
                hx.len(),
                hy.len()
            )));
        }
        if let Some(bad) = hx.iter().chain(&hy).find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite control amplitude {bad}")));
        }
        Ok(Self { dt, hx, hy })
    }

    pub fn zeros(n: usize, dt: f64) -> Result<Self> {
        Self::new(dt, vec![0.0; n], vec![0.0; n])
    }

    /// Builds a sequence from the concatenated `[hx; hy]` parameter vector.
    pub fn from_params(dt: f64, params: &[f64]) -> Result<Self> {
        if !params.len().is_multiple_of(2) {
            return Err(invalid(format!("parameter vector has odd length {}", params.len())));
        }
        let n = params.len() / 2;
        Self::new(dt, params[..n].to_vec(), params[n..].to_vec())
    }

    /// Concatenated `[hx; hy]`.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(2 * self.len());
        p.extend_from_slice(&self.hx);
        p.extend_from_slice(&self.hy);
        p
    }

    pub fn len(&self) -> usize {
        self.hx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hx.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hx(&self) -> &[f64] {
        &self.hx
    }

    pub fn hy(&self) -> &[f64] {
        &self.hy
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.len() as f64
    }

    pub fn negated(&self) -> Self {
        Self {
            dt: self.dt,
            hx: self.hx.iter().map(|v| -v).collect(),
            hy: self.hy.iter().map(|v| -v).collect(),
        }
    }
}

/// `H₀ + hx·Sx¹ + hy·Sy¹`.
pub fn slice_hamiltonian(sys: &SpinChainSystem, hx: f64, hy: f64) -> CMatrix {
    let mut h = sys.drift().clone();
    h.zip_zip_apply(sys.control_x(), sys.control_y(), |h, x, y| {
        *h += x * hx + y * hy;
    });
    h
}

/// Eigendecomposition `H = V Λ V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn of(h: &CMatrix) -> Option<Self> {
        let eig = SymmetricEigen::try_new(h.clone(), EIGEN_EPS, EIGEN_MAX_ITER)?;
        Some(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    fn phases(&self, dt: f64) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * dt))
            .collect()
    }

    /// `exp(−i·H·dt) = V diag(e^{−iλdt}) V†`.
    pub fn propagator(&self, dt: f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (mut col, phase) in scaled.column_iter_mut().zip(self.phases(dt)) {
            col *= phase;
        }
        scaled * v.adjoint()
    }

    /// Divided differences of `λ ↦ e^{−iλdt}` over pairs of eigenvalues.
    ///
    /// Written as `e^{−i(λp+λq)dt/2}·sinc((λp−λq)dt/2)`, which equals
    /// `(e^{−iλp dt} − e^{−iλq dt}) / (−i(λp−λq)dt)` off the diagonal and
    /// reduces to `e^{−iλp dt}` for (near-)degenerate pairs without
    /// cancellation.
    pub fn divided_differences(&self, dt: f64) -> CMatrix {
        let l = &self.eigenvalues;
        let d = l.len();
        CMatrix::from_fn(d, d, |p, q| {
            let mean = 0.5 * (l[p] + l[q]) * dt;
            let half_gap = 0.5 * (l[p] - l[q]) * dt;
            Complex64::from_polar(sinc(half_gap), -mean)
        })
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// `V† (−i·dt·B) V ∘ Γ`: the directional derivative in the eigenbasis of `H`.
fn derivative_in_eigenbasis(spec: &Spectrum, gamma: &CMatrix, b: &CMatrix, dt: f64) -> CMatrix {
    let v = &spec.eigenvectors;
    let mut c = v.adjoint() * b * v;
    let scale = Complex64::new(0.0, -dt);
    c.zip_apply(gamma, |c, g| *c *= scale * g);
    c
}

/// Exact derivative `d/ds exp(−i(H + sB)dt)` at `s = 0`.
pub fn exp_derivative(h: &CMatrix, b: &CMatrix, dt: f64) -> Result<CMatrix> {
    if h.shape() != b.shape() || !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            actual: b.nrows(),
        });
    }
    let spec = Spectrum::of(h).ok_or(Error::Eigendecomposition { slice: 0 })?;
    let gamma = spec.divided_differences(dt);
    let inner = derivative_in_eigenbasis(&spec, &gamma, b, dt);
    let v = &spec.eigenvectors;
    Ok(v * inner * v.adjoint())
}

/// Slice propagators and their running products.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    /// `U_i = exp(−i·H_i·dt)` in time order.
    pub slice_unitaries: Vec<CMatrix>,
    /// `prefix_products[i] = U_{i+1} ··· U_1` (0-based `i`).
    pub prefix_products: Vec<CMatrix>,
    /// `U_n ··· U_1`.
    pub total: CMatrix,
}

fn slice_spectra(sys: &SpinChainSystem, controls: &ControlSequence) -> Result<Vec<Spectrum>> {
    controls
        .hx()
        .iter()
        .zip(controls.hy())
        .enumerate()
        .map(|(slice, (&hx, &hy))| {
            Spectrum::of(&slice_hamiltonian(sys, hx, hy)).ok_or(Error::Eigendecomposition { slice })
        })
        .collect()
}

pub fn propagate(sys: &SpinChainSystem, controls: &ControlSequence) -> Result<PropagationResult> {
    let dt = controls.dt();
    let slice_unitaries: Vec<CMatrix> = slice_spectra(sys, controls)?
        .iter()
        .map(|s| s.propagator(dt))
        .collect();
    let mut prefix_products = Vec::with_capacity(slice_unitaries.len());
    let mut acc = CMatrix::identity(sys.dim(), sys.dim());
    for u in &slice_unitaries {
        acc = u * &acc;
        prefix_products.push(acc.clone());
    }
    Ok(PropagationResult {
        slice_unitaries,
        prefix_products,
        total: acc,
    })
}

/// Only the total propagator, without keeping intermediate products.
pub fn total_propagator(sys: &SpinChainSystem, controls: &ControlSequence) -> Result<CMatrix> {
    let dt = controls.dt();
    let mut acc = CMatrix::identity(sys.dim(), sys.dim());
    for (slice, (&hx, &hy)) in controls.hx().iter().zip(controls.hy()).enumerate() {
        let spec = Spectrum::of(&slice_hamiltonian(sys, hx, hy))
            .ok_or(Error::Eigendecomposition { slice })?;
        acc = spec.propagator(dt) * acc;
    }
    Ok(acc)
}

/// `Tr(U_T† U)`.
pub fn overlap(target: &TargetGate, u: &CMatrix) -> Result<Complex64> {
    let t = target.unitary();
    if u.shape() != t.shape() {
        return Err(Error::DimensionMismatch {
            expected: t.nrows(),
            actual: u.nrows(),
        });
    }
    // Tr(A† B) = Σ conj(A_ij) B_ij
    Ok(t.iter().zip(u.iter()).map(|(a, b)| a.conj() * b).sum())
}

/// `|Tr(U_T† U)| / 2^N`.
pub fn gate_fidelity(target: &TargetGate, u: &CMatrix) -> Result<f64> {
    Ok(overlap(target, u)?.norm() / target.dim() as f64)
}

/// Fidelity and its gradient with respect to every slice amplitude.
#[derive(Debug, Clone)]
pub struct FidelityGradient {
    pub fidelity: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// Set when `|Tr(U_T† U)|` is below [`SINGULAR_OVERLAP`]; the gradient is
    /// then reported as zero.
    pub singular: bool,
}

/// Exact gradient of `F = |τ|/2^N`, `τ = Tr(U_T† U)`.
///
/// `∂τ/∂h_{k,i} = Tr(U_T† · U_n···U_{i+1} · D_{k,i} · U_{i−1}···U_1)` with
/// `D_{k,i}` the derivative of slice `i`'s exponential along `S_k¹`.
/// Prefix products are stored and the suffix is accumulated backwards, so
/// the cost is `n` eigendecompositions plus `O(n)` matrix products.
pub fn fidelity_gradient(
    sys: &SpinChainSystem,
    controls: &ControlSequence,
    target: &TargetGate,
) -> Result<FidelityGradient> {
    let dim = sys.dim();
    if target.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: target.dim(),
        });
    }
    let dt = controls.dt();
    let n = controls.len();
    let spectra = slice_spectra(sys, controls)?;
    let unitaries: Vec<CMatrix> = spectra.iter().map(|s| s.propagator(dt)).collect();

    // prefix[i] = U_i ··· U_1 (1-based), prefix[0] = I
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(CMatrix::identity(dim, dim));
    for u in &unitaries {
        let next = u * prefix.last().unwrap();
        prefix.push(next);
    }
    let tau = overlap(target, &prefix[n])?;
    let fidelity = tau.norm() / dim as f64;
    if tau.norm() < SINGULAR_OVERLAP {
        return Ok(FidelityGradient {
            fidelity,
            grad_x: vec![0.0; n],
            grad_y: vec![0.0; n],
            singular: true,
        });
    }
    let phase = tau.conj() / (tau.norm() * dim as f64);

    let mut grad_x = vec![0.0; n];
    let mut grad_y = vec![0.0; n];
    // suffix = U_T† U_n ··· U_{i+1}
    let mut suffix = target.unitary().adjoint();
    for i in (0..n).rev() {
        let spec = &spectra[i];
        let v = &spec.eigenvectors;
        // Tr(suffix · D · prefix[i]) = Tr(W · X), W = V† prefix[i] suffix V
        let w = v.adjoint() * (&prefix[i] * &suffix) * v;
        let gamma = spec.divided_differences(dt);
        for (b, out) in [(sys.control_x(), &mut grad_x), (sys.control_y(), &mut grad_y)] {
            let x = derivative_in_eigenbasis(spec, &gamma, b, dt);
            let dtau: Complex64 = w.iter().zip(x.transpose().iter()).map(|(a, b)| a * b).sum();
            out[i] = (phase * dtau).re;
        }
        suffix *= &unitaries[i];
    }
    Ok(FidelityGradient {
        fidelity,
        grad_x,
        grad_y,
        singular: false,
    })
}
