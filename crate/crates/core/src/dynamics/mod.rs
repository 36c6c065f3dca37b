//! Closed- and open-system time evolution of the truncated circuit along an
//! anneal path.
//!
//! The state is carried in the lowest `K` instantaneous eigenvectors of the
//! full Hamiltonian. Each integrator step works in the frame fixed at the
//! start of the step (interaction picture with respect to the frame
//! energies); after an accepted step the Hamiltonian is re-diagonalized and
//! the state rotated into the new eigenbasis.

pub mod bath;
pub mod lindblad;
pub mod ode;
mod propagate;
pub(crate) mod quad;
pub mod system;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, Model};
use crate::error::{Error, Result};
use crate::linalg::{self, Basis, CMatrix, OperatorMatrix, Spectrum, C64};
use crate::path::AnnealPath;
use crate::units;

pub use bath::{gamma, lamb_shift_S, Bath, BathParams};
pub use lindblad::{bohr_bins, lindblad_ops, BohrBin, LindbladOp};
pub use propagate::{evolve_closed, evolve_open};
pub use system::{CircuitDrive, DrivenSystem, TwoLevelSweep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Retained eigenlevels `K`.
    pub levels: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// ns
    pub max_step: f64,
    /// ns
    pub initial_step: f64,
    /// ns; smaller proposed steps abort the run.
    pub min_step: f64,
    /// Uniform output grid over the whole evolution (including both ends).
    pub output_points: usize,
    /// Extra times (ns) at which the full state is kept.
    pub snapshot_times: Vec<f64>,
    /// Most negative eigenvalue of ρ tolerated before aborting.
    pub positivity_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            levels: 10,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 1.0,
            initial_step: 1e-3,
            min_step: 1e-12,
            output_points: 101,
            snapshot_times: Vec::new(),
            positivity_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn with_levels(mut self, k: usize) -> Self {
        self.levels = k;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 levels, got {}", self.levels)));
        }
        if self.levels > dim {
            return Err(Error::LevelOutOfRange { requested: self.levels, dim });
        }
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol), ("max_step", self.max_step), ("initial_step", self.initial_step), ("min_step", self.min_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.output_points < 2 {
            return Err(Error::InvalidConfig("output_points must be ≥ 2".into()));
        }
        if !(self.positivity_tol >= 0.0) {
            return Err(Error::InvalidConfig("positivity_tol must be non-negative".into()));
        }
        if self.snapshot_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidConfig("snapshot times must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Density matrix in the retained subspace; `basis` is `Subspace` for the
/// instantaneous eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub basis: Basis,
    pub matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(basis: Basis, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::BasisMismatch(format!("{}×{} matrix in {:?}", matrix.nrows(), matrix.ncols(), basis)));
        }
        Ok(Self { basis, matrix })
    }

    pub fn pure(basis: Basis, psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        Self::new(basis, &v * v.adjoint())
    }

    /// Thermal state `e^{−βE}/Z` of the given levels (GHz) at `temperature_mk`.
    pub fn gibbs(energies_ghz: &[f64], temperature_mk: f64) -> Self {
        let e0 = energies_ghz.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = energies_ghz.iter().map(|&e| (-units::reduced_photon_energy(e - e0, temperature_mk)).exp()).collect();
        let z: f64 = w.iter().sum();
        let k = energies_ghz.len();
        let mut m = CMatrix::zeros(k, k);
        for (i, wi) in w.iter().enumerate() {
            m[(i, i)] = C64::new(wi / z, 0.0);
        }
        Self { basis: Basis::Subspace { dim: k }, matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        linalg::hermitian_deviation(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::small_eigh(&hermitian_part(&self.matrix)).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch(format!("{:?} vs {:?}", self.basis, other.basis)));
        }
        let diff = hermitian_part(&(&self.matrix - &other.matrix));
        Ok(0.5 * linalg::small_eigh(&diff).0.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// `Tr(ρ A)`.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<f64> {
        if op.basis != self.basis {
            return Err(Error::BasisMismatch(format!("state in {:?}, operator in {:?}", self.basis, op.basis)));
        }
        Ok(linalg::trace(&(&self.matrix * &op.matrix)).re)
    }
}

pub(crate) fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Full state kept at a requested time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub state: DensityMatrix,
    pub spectrum: Spectrum,
    /// Coupling operator in the retained subspace (nA for circuits).
    pub ip: OperatorMatrix,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest `|Tr ρ − 1|` (or `|‖ψ‖² − 1|`) seen after a step.
    pub max_trace_error: f64,
    /// Largest `‖ρ − ρ†‖_max` before re-symmetrisation.
    pub max_hermitian_error: f64,
    pub min_eigenvalue: f64,
    /// Largest `|Σ populations − 1|` at the output times.
    pub max_population_error: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// `populations[i][k]`: level `k` of the instantaneous eigenbasis at `times[i]`.
    pub populations: Vec<Vec<f64>>,
    pub final_state: DensityMatrix,
    pub final_spectrum: Spectrum,
    pub final_ip: OperatorMatrix,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
}

impl EvolutionResult {
    pub fn final_populations(&self) -> Vec<f64> {
        self.final_state.populations()
    }
}

/// Schrödinger evolution from the ground state at the path start.
pub fn evolve_schrodinger(params: &CircuitParams, path: &AnnealPath, model: Model, config: &SolverConfig) -> Result<EvolutionResult> {
    evolve_closed(&CircuitDrive::new(params, path, model)?, config)
}

/// Adiabatic-master-equation evolution from the ground state at the path
/// start. Builds the Lamb-shift table once; for repeated runs construct a
/// [`Bath`] and call [`evolve_open`] directly.
pub fn evolve_ame(params: &CircuitParams, path: &AnnealPath, model: Model, bath: &BathParams, config: &SolverConfig) -> Result<EvolutionResult> {
    let bath = Bath::new(bath)?;
    evolve_open(&CircuitDrive::new(params, path, model)?, &bath, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gibbs_state_is_normalised_and_ordered() {
        let g = DensityMatrix::gibbs(&[0.0, 0.3, 5.0], 10.0);
        let p = g.populations();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p[0] > p[1] && p[1] > p[2]);
        let ratio = p[1] / p[0];
        assert!((ratio - (-units::reduced_photon_energy(0.3, 10.0)).exp()).abs() < 1e-14);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states() {
        let b = Basis::Subspace { dim: 2 };
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let a = DensityMatrix::pure(b, &[one, zero]).unwrap();
        let c = DensityMatrix::pure(b, &[zero, one]).unwrap();
        assert!((a.trace_distance(&c).unwrap() - 1.0).abs() < 1e-14);
        assert!(a.trace_distance(&a).unwrap() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate(61).is_ok());
        assert!(SolverConfig::default().with_levels(1).validate(61).is_err());
        assert!(SolverConfig::default().with_levels(62).validate(61).is_err());
        assert!(SolverConfig { rel_tol: 0.0, ..Default::default() }.validate(61).is_err());
    }
}
