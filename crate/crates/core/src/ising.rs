//! Two-level (Ising) reduction of the circuit in the persistent-current basis.

use std::f64::consts::PI;

use serde::Serialize;

use crate::circuit::{self, CircuitModel, CircuitParams, FluxPoint, Model};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, OperatorMatrix, Spectrum, C64};
use crate::path::AnnealPath;

/// Smallest `I_p^low` eigenvalue splitting (nA) that still defines a basis.
pub const DEGENERACY_TOL_NA: f64 = 1e-6;
/// Minimum weight each of the two lowest states must have in every well.
pub const WELL_WEIGHT_MIN: f64 = 0.01;
const PHASE_GRID: usize = 512;

/// `H_eff = A σx + B σz + α_I`, all in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsingCoefficients {
    pub a: f64,
    pub b: f64,
    pub alpha_i: f64,
    pub flux: FluxPoint,
    /// Both lowest states have support in every well of the potential.
    pub valid: bool,
}

/// Persistent-current eigenbasis of the low-energy subspace, expressed in
/// `{|g⟩, |e⟩}`; columns ordered by ascending current.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputationalBasis {
    pub vectors: CMatrix,
    pub currents: [f64; 2],
}

/// `I_p` restricted to the two lowest levels.
pub fn project_ip_low(spectrum: &Spectrum, ip: &OperatorMatrix) -> Result<CMatrix> {
    if spectrum.len() < 2 {
        return Err(Error::LevelOutOfRange { requested: 2, dim: spectrum.len() });
    }
    if spectrum.basis != ip.basis {
        return Err(Error::BasisMismatch(format!("spectrum in {:?}, operator in {:?}", spectrum.basis, ip.basis)));
    }
    let v = spectrum.eigenvectors.columns(0, 2).into_owned();
    Ok(linalg::project(&ip.matrix, &v))
}

pub fn computational_basis(ip_low: &CMatrix) -> Result<ComputationalBasis> {
    let (vals, vecs) = linalg::small_eigh(ip_low);
    let splitting = vals[1] - vals[0];
    if splitting < DEGENERACY_TOL_NA {
        return Err(Error::DegenerateProjection { splitting_na: splitting });
    }
    Ok(ComputationalBasis { vectors: vecs, currents: [vals[0], vals[1]] })
}

/// Coefficients from an already computed spectrum and current operator.
pub fn coefficients_from_spectrum(
    cm: &CircuitModel,
    flux: FluxPoint,
    spectrum: &Spectrum,
    ip: &OperatorMatrix,
) -> Result<IsingCoefficients> {
    let ip_low = project_ip_low(spectrum, ip)?;
    let basis = computational_basis(&ip_low)?;
    let (eg, ee) = (spectrum.eigenvalues[0], spectrum.eigenvalues[1]);
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(eg, 0.0), C64::new(ee, 0.0)]));
    let u = &basis.vectors;
    let h = u.adjoint() * d * u;
    // a diagonal phase rotation removes α_y and makes α_x = |H01| ≥ 0
    let a = h[(0, 1)].norm();
    let alpha_z = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let f = cm.params.effective_flux(flux);
    let tilt = f.phi_z - circuit::phi_d(&cm.params, f.phi_x);
    let b = if tilt >= 0.0 { alpha_z.abs() } else { -alpha_z.abs() };
    let alpha_i = 0.5 * (eg + ee);
    let valid = two_level_valid(cm, flux, spectrum);
    Ok(IsingCoefficients { a, b, alpha_i, flux, valid })
}

pub fn ising_coefficients(params: &CircuitParams, flux: FluxPoint, model: Model) -> Result<IsingCoefficients> {
    let cm = CircuitModel::new(params, model)?;
    ising_for_model(&cm, flux)
}

pub fn ising_for_model(cm: &CircuitModel, flux: FluxPoint) -> Result<IsingCoefficients> {
    let spectrum = cm.spectrum(flux, 2)?;
    let ip = cm.persistent_current(flux);
    coefficients_from_spectrum(cm, flux, &spectrum, &ip)
}

/// Wells of the classical potential along the slow phase, as basin labels
/// on a periodic grid. Returns `(labels, number_of_wells)`.
pub fn well_basins(cm: &CircuitModel, flux: FluxPoint, grid: &[f64]) -> (Vec<usize>, usize) {
    let n = grid.len();
    let u: Vec<f64> = grid.iter().map(|&p| cm.potential(flux, p)).collect();
    let minima: Vec<usize> = (0..n).filter(|&i| u[i] < u[(i + n - 1) % n] && u[i] <= u[(i + 1) % n]).collect();
    let labels = (0..n)
        .map(|start| {
            // walk downhill to a local minimum
            let mut i = start;
            loop {
                let (l, r) = ((i + n - 1) % n, (i + 1) % n);
                let next = if u[l] < u[i] && u[l] <= u[r] {
                    l
                } else if u[r] < u[i] {
                    r
                } else {
                    break;
                };
                i = next;
            }
            minima.iter().position(|&m| m == i).unwrap_or(0)
        })
        .collect();
    (labels, minima.len().max(1))
}

/// True when the two lowest eigenstates together put at least
/// [`WELL_WEIGHT_MIN`] of their combined probability in every well, i.e. the
/// pair spans both wells rather than sitting in one. A single-well potential
/// is valid.
pub fn two_level_valid(cm: &CircuitModel, flux: FluxPoint, spectrum: &Spectrum) -> bool {
    let grid: Vec<f64> = (0..PHASE_GRID).map(|i| -PI + 2.0 * PI * i as f64 / PHASE_GRID as f64).collect();
    let (labels, wells) = well_basins(cm, flux, &grid);
    if wells < 2 {
        return true;
    }
    let mut weight = vec![0.0; wells];
    for k in 0..2 {
        let state: Vec<C64> = spectrum.eigenvectors.column(k).iter().copied().collect();
        let density = cm.phase_density(&state, &grid);
        let total: f64 = density.iter().sum();
        for (w, &l) in density.iter().zip(&labels) {
            weight[l] += 0.5 * w / total;
        }
    }
    weight.iter().all(|&w| w >= WELL_WEIGHT_MIN)
}

/// One point of an anneal schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleSample {
    pub s: f64,
    pub coefficients: Option<IsingCoefficients>,
}

impl ScheduleSample {
    pub fn is_valid(&self) -> bool {
        self.coefficients.is_some_and(|c| c.valid)
    }
}

/// Ising schedule along the anneal segment of a path (`s = t/t_f ∈ [0, 1]`).
/// Points where the projection is undefined are kept with no coefficients.
pub fn schedule_along_path(params: &CircuitParams, path: &AnnealPath, model: Model) -> Result<Vec<ScheduleSample>> {
    let cm = CircuitModel::new(params, model)?;
    let mut out = Vec::new();
    for (i, &t) in path.t.iter().enumerate() {
        if t > path.t_f + 1e-12 {
            break;
        }
        let flux = FluxPoint::new(path.phi_x[i], path.phi_z[i]);
        let coefficients = match ising_for_model(&cm, flux) {
            Ok(c) => Some(c),
            Err(Error::DegenerateProjection { .. }) => None,
            Err(e) => return Err(e),
        };
        out.push(ScheduleSample { s: t / path.t_f, coefficients });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CircuitModel {
        CircuitModel::new(&CircuitParams::fitted_1d(), Model::one_d()).unwrap()
    }

    #[test]
    fn projection_is_hermitian_with_consistent_trace() {
        let cm = model();
        let f = FluxPoint::new(1.7 * PI, 0.01);
        let s = cm.spectrum(f, 2).unwrap();
        let ip = cm.persistent_current(f);
        let low = project_ip_low(&s, &ip).unwrap();
        assert!(linalg::hermitian_deviation(&low) < 1e-12 * linalg::max_abs(&low));
        let elems = s.matrix_elements(&ip).unwrap();
        assert!((linalg::trace(&low) - (elems[(0, 0)] + elems[(1, 1)])).norm() < 1e-9);
    }

    #[test]
    fn degeneracy_point_has_antisymmetric_diagonal() {
        let cm = model();
        let px = 1.6 * PI;
        let f = FluxPoint::new(px, circuit::phi_d(&cm.params, px));
        let s = cm.spectrum(f, 2).unwrap();
        let low = project_ip_low(&s, &cm.persistent_current(f)).unwrap();
        let scale = low[(0, 1)].norm().max(low[(0, 0)].re.abs());
        assert!((low[(0, 0)].re + low[(1, 1)].re).abs() < 1e-6 * scale);
    }

    #[test]
    fn identity_and_signs() {
        let cm = model();
        for (px, dz) in [(1.5 * PI, 0.004), (1.8 * PI, -0.003), (1.3 * PI, 0.05)] {
            let f = FluxPoint::new(px, circuit::phi_d(&cm.params, px) + dz);
            let c = ising_for_model(&cm, f).unwrap();
            let s = cm.spectrum(f, 2).unwrap();
            assert!(c.a >= 0.0);
            assert_eq!(c.b > 0.0, dz > 0.0);
            assert!(((c.a * c.a + c.b * c.b).sqrt() - 0.5 * s.gap(0, 1)).abs() < 1e-9);
        }
    }

    #[test]
    fn deep_tilt_is_invalid() {
        let cm = model();
        let c = ising_for_model(&cm, FluxPoint::new(2.0 * PI, 0.3)).unwrap();
        assert!(!c.valid);
        let c = ising_for_model(&cm, FluxPoint::new(2.0 * PI, 0.0)).unwrap();
        assert!(c.valid);
        // localised qubit states, one per well
        let c = ising_for_model(&cm, FluxPoint::new(2.0 * PI, 0.02)).unwrap();
        assert!(c.valid);
    }

    #[test]
    fn degenerate_projection_is_reported() {
        let z = CMatrix::from_element(2, 2, C64::new(0.0, 0.0));
        assert!(matches!(computational_basis(&z), Err(Error::DegenerateProjection { .. })));
    }
}
