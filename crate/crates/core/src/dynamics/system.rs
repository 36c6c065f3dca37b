//! Time-dependent Hamiltonians in the parametric form consumed by the
//! propagator: `H(t) = Σ_k h_k(t) O_k + h_k(t)* O_kᵀ` over real sparse
//! operators `O_k`, with the bath coupling written the same way.

use crate::circuit::{CircuitModel, CircuitParams, Model};
use crate::error::{Error, Result};
use crate::linalg::{Basis, CMatrix, SparseOp, C64, ONE, ZERO};
use crate::path::AnnealPath;
use crate::units;

pub trait DrivenSystem: Sync {
    fn basis(&self) -> Basis;
    fn operators(&self) -> &[SparseOp];
    /// Hamiltonian coefficients at `t` (ns), GHz.
    fn h_coefficients(&self, t: f64) -> Vec<C64>;
    /// Coefficients of the bath-coupling operator, in energy units (GHz per
    /// unit of the coupled quantity).
    fn coupling_coefficients(&self, t: f64) -> Vec<C64>;
    /// Physical units of the coupling operator per GHz (nA per GHz/rad for
    /// the persistent current).
    fn current_scale(&self) -> f64;
    /// Total evolution time, ns.
    fn duration(&self) -> f64;
    /// Times where the coefficients have kinks; steps land on them exactly.
    fn breakpoints(&self) -> Vec<f64>;

    fn dim(&self) -> usize {
        self.basis().dim()
    }

    /// Dense `Σ c_k O_k + c_k* O_kᵀ`.
    fn dense(&self, coefficients: &[C64]) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for (op, &c) in self.operators().iter().zip(coefficients) {
            if c != ZERO {
                for &(r, col, v) in &op.entries {
                    m[(r, col)] += c * v;
                    m[(col, r)] += c.conj() * v;
                }
            }
        }
        m
    }
}

/// A circuit model driven along an anneal path; the bath couples to the
/// persistent current.
pub struct CircuitDrive {
    pub circuit: CircuitModel,
    pub path: AnnealPath,
    ops: Vec<SparseOp>,
}

impl CircuitDrive {
    pub fn new(params: &CircuitParams, path: &AnnealPath, model: Model) -> Result<Self> {
        let circuit = CircuitModel::new(params, model)?;
        Ok(Self::from_model(circuit, path.clone()))
    }

    pub fn from_model(circuit: CircuitModel, path: AnnealPath) -> Self {
        let half: Vec<f64> = circuit.kinetic.iter().map(|t| 0.5 * t).collect();
        let ops = vec![SparseOp::diagonal(&half), circuit.z_shift.clone(), circuit.x_shift.clone()];
        Self { circuit, path, ops }
    }
}

impl DrivenSystem for CircuitDrive {
    fn basis(&self) -> Basis {
        self.circuit.basis()
    }

    fn operators(&self) -> &[SparseOp] {
        &self.ops
    }

    fn h_coefficients(&self, t: f64) -> Vec<C64> {
        let c = self.circuit.coefficients(self.path.flux_at(t));
        vec![ONE, c.a, c.b]
    }

    fn coupling_coefficients(&self, t: f64) -> Vec<C64> {
        vec![ZERO, self.circuit.current_coefficient(self.path.flux_at(t)), ZERO]
    }

    fn current_scale(&self) -> f64 {
        units::na_per_ghz_per_rad()
    }

    fn duration(&self) -> f64 {
        self.path.end_time()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.path.breakpoints()
    }
}

/// `H = A σ_x + (B(t)/2) σ_z` with `B` swept linearly from `b_start` to
/// `b_end`; the minimum gap is `2A` at `B = 0`. Couples to the bath via σ_z.
pub struct TwoLevelSweep {
    pub a: f64,
    pub b_start: f64,
    pub b_end: f64,
    pub duration: f64,
    ops: Vec<SparseOp>,
}

impl TwoLevelSweep {
    pub fn new(a: f64, b_start: f64, b_end: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !a.is_finite() || !b_start.is_finite() || !b_end.is_finite() {
            return Err(Error::InvalidInput("two-level sweep needs finite fields and a positive duration".into()));
        }
        let ops = vec![SparseOp { dim: 2, entries: vec![(0, 1, 1.0)] }, SparseOp::diagonal(&[0.5, -0.5])];
        Ok(Self { a, b_start, b_end, duration, ops })
    }

    pub fn b_at(&self, t: f64) -> f64 {
        self.b_start + (self.b_end - self.b_start) * (t / self.duration).clamp(0.0, 1.0)
    }
}

impl DrivenSystem for TwoLevelSweep {
    fn basis(&self) -> Basis {
        Basis::Generic { dim: 2 }
    }

    fn operators(&self) -> &[SparseOp] {
        &self.ops
    }

    fn h_coefficients(&self, t: f64) -> Vec<C64> {
        // the diagonal operator is counted twice by the `+ h.c.` convention
        vec![C64::new(self.a, 0.0), C64::new(0.5 * self.b_at(t), 0.0)]
    }

    fn coupling_coefficients(&self, _t: f64) -> Vec<C64> {
        vec![ZERO, C64::new(1.0, 0.0)]
    }

    fn current_scale(&self) -> f64 {
        1.0
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.duration]
    }
}
