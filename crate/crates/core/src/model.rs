//! Spin-chain operators and target gates.
//!
//! Site operators are full Pauli matrices, not spin-1/2 operators `σ/2`.
//! Under the other convention the coupling and the control amplitudes are
//! rescaled by constant factors. Site 1 is the leftmost (most significant)
//! tensor factor, so the control acts on the most significant qubit and the
//! target gates act on the least significant ones.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest chain handled. The dense representation grows as `4^N`.
pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn matrix(self) -> CMatrix {
        let entries = match self {
            PauliAxis::X => [ZERO, ONE, ONE, ZERO],
            PauliAxis::Y => [ZERO, -I, I, ZERO],
            PauliAxis::Z => [ONE, ZERO, ZERO, -ONE],
        };
        DMatrix::from_row_slice(2, 2, &entries)
    }
}

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(invalid(format!(
            "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Kronecker product of a list of factors, leftmost factor most significant.
fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

/// `I^{⊗(site−1)} ⊗ σ_axis ⊗ I^{⊗(N−site)}` with 1-based `site`.
pub fn pauli_embed(axis: PauliAxis, site: usize, n_qubits: usize) -> Result<CMatrix> {
    check_qubits(n_qubits)?;
    if site == 0 || site > n_qubits {
        return Err(invalid(format!("site {site} outside 1..={n_qubits}")));
    }
    let left = CMatrix::identity(1 << (site - 1), 1 << (site - 1));
    let right = CMatrix::identity(1 << (n_qubits - site), 1 << (n_qubits - site));
    Ok(kron_all([&left, &axis.matrix(), &right]))
}

/// Isotropic nearest-neighbour Heisenberg Hamiltonian
/// `J Σ_i Σ_k σ_k^i σ_k^{i+1}` on an open chain.
pub fn build_drift(n_qubits: usize, coupling: f64) -> Result<CMatrix> {
    check_qubits(n_qubits)?;
    if !coupling.is_finite() {
        return Err(invalid(format!("coupling {coupling} is not finite")));
    }
    let dim = 1 << n_qubits;
    let mut h = CMatrix::zeros(dim, dim);
    for site in 1..n_qubits {
        for axis in PauliAxis::ALL {
            let a = pauli_embed(axis, site, n_qubits)?;
            let b = pauli_embed(axis, site + 1, n_qubits)?;
            h += a * b;
        }
    }
    Ok(h * Complex64::from(coupling))
}

/// Drift and control operators of a chain controlled on site 1.
#[derive(Debug, Clone)]
pub struct SpinChainSystem {
    n_qubits: usize,
    coupling: f64,
    drift: CMatrix,
    control_x: CMatrix,
    control_y: CMatrix,
}

impl SpinChainSystem {
    pub fn new(n_qubits: usize, coupling: f64) -> Result<Self> {
        Ok(Self {
            n_qubits,
            coupling,
            drift: build_drift(n_qubits, coupling)?,
            control_x: pauli_embed(PauliAxis::X, 1, n_qubits)?,
            control_y: pauli_embed(PauliAxis::Y, 1, n_qubits)?,
        })
    }

    /// Chain with unit coupling; energies and amplitudes are then in units of `J`.
    pub fn with_unit_coupling(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, 1.0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn drift(&self) -> &CMatrix {
        &self.drift
    }

    pub fn control_x(&self) -> &CMatrix {
        &self.control_x
    }

    pub fn control_y(&self) -> &CMatrix {
        &self.control_y
    }

    /// Copy of the system with the drift negated. Used for time-reversal checks.
    pub fn with_negated_drift(&self) -> Self {
        Self {
            coupling: -self.coupling,
            drift: -self.drift.clone(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Not,
    Swap,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Not => "not",
            GateKind::Swap => "swap",
        }
    }
}

impl std::str::FromStr for GateKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "not" => Ok(GateKind::Not),
            "swap" => Ok(GateKind::Swap),
            other => Err(invalid(format!("unknown target '{other}', expected not|swap"))),
        }
    }
}

/// A unitary to synthesize on an `N`-qubit chain.
#[derive(Debug, Clone)]
pub struct TargetGate {
    n_qubits: usize,
    unitary: CMatrix,
}

impl TargetGate {
    /// Wraps an arbitrary unitary. Rejects non-square, wrongly sized or
    /// non-unitary input.
    pub fn from_unitary(n_qubits: usize, unitary: CMatrix) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        if unitary.nrows() != dim || unitary.ncols() != dim {
            return Err(invalid(format!(
                "target is {}x{}, expected {dim}x{dim}",
                unitary.nrows(),
                unitary.ncols()
            )));
        }
        let err = crate::unitarity_error(&unitary);
        if err > 1e-10 {
            return Err(invalid(format!("target is not unitary (error {err:e})")));
        }
        Ok(Self { n_qubits, unitary })
    }

    pub fn build(kind: GateKind, n_qubits: usize) -> Result<Self> {
        match kind {
            GateKind::Not => target_not(n_qubits),
            GateKind::Swap => target_swap(n_qubits),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.unitary.nrows()
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }
}

/// `I^{⊗(N−1)} ⊗ σ_x`: negation of the last qubit.
pub fn target_not(n_qubits: usize) -> Result<TargetGate> {
    Ok(TargetGate {
        n_qubits,
        unitary: pauli_embed(PauliAxis::X, n_qubits, n_qubits)?,
    })
}

/// `I^{⊗(N−2)} ⊗ SWAP`: exchange of the last two qubits.
pub fn target_swap(n_qubits: usize) -> Result<TargetGate> {
    check_qubits(n_qubits)?;
    if n_qubits < 2 {
        return Err(invalid(format!("swap needs at least 2 qubits, got {n_qubits}")));
    }
    let mut swap = CMatrix::zeros(4, 4);
    for (row, col) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        swap[(row, col)] = ONE;
    }
    let left = CMatrix::identity(1 << (n_qubits - 2), 1 << (n_qubits - 2));
    Ok(TargetGate {
        n_qubits,
        unitary: left.kronecker(&swap),
    })
}
