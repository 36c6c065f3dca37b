//! Persistent-current readout: a smoothed projector onto right-circulating
//! current with sensitivity `ΔI`.

use serde::{Deserialize, Serialize};

use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, OperatorMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutModel {
    /// nA
    #[serde(rename = "delta_I_nA")]
    pub delta_i: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self { delta_i: 10.0 }
    }
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_i > 0.0 && self.delta_i.is_finite()) {
            return Err(Error::InvalidInput(format!("readout sensitivity must be positive, got {}", self.delta_i)));
        }
        Ok(())
    }
}

/// `f(x) = (tanh x + 1)/2`.
pub fn response(x: f64) -> f64 {
    0.5 * (x.tanh() + 1.0)
}

fn weighted(ip: &OperatorMatrix, model: &ReadoutModel, sign: f64) -> Result<OperatorMatrix> {
    model.validate()?;
    if !ip.is_hermitian() {
        return Err(Error::NotHermitian { deviation: ip.hermitian_deviation() });
    }
    let (currents, v) = linalg::small_eigh(&ip.matrix);
    let k = currents.len();
    let mut d = CMatrix::zeros(k, k);
    for (i, &c) in currents.iter().enumerate() {
        d[(i, i)] = C64::new(response(sign * c / model.delta_i), 0.0);
    }
    let m = &v * d * v.adjoint();
    Ok(OperatorMatrix { basis: ip.basis, matrix: (&m + m.adjoint()) * C64::new(0.5, 0.0) })
}

/// `M_r = Σ_λ f(I_λ/ΔI)|λ⟩⟨λ|` over the eigenpairs of the current operator.
pub fn povm_right(ip_subspace: &OperatorMatrix, model: &ReadoutModel) -> Result<OperatorMatrix> {
    weighted(ip_subspace, model, 1.0)
}

/// Complement `M_l = I − M_r`, i.e. the same construction with `f(−x)`.
pub fn povm_left(ip_subspace: &OperatorMatrix, model: &ReadoutModel) -> Result<OperatorMatrix> {
    weighted(ip_subspace, model, -1.0)
}

/// `P_r = Tr(ρ M_r)`.
pub fn p_right(rho: &DensityMatrix, m_r: &OperatorMatrix) -> Result<f64> {
    rho.expectation(m_r)
}
