//! CSFQ circuit Hamiltonians in a truncated charge basis.
//!
//! Both models share the parametric form
//!
//! ```text
//! H = T + a·Z + a*·Zᵀ + b·X + b*·Xᵀ
//! ```
//!
//! where `T` is the diagonal charging term, `Z` the shift operator carried by
//! the z-loop cosine and `X` the double shift carried by the x-loop cosine.
//! Only the complex coefficients `a(φ_z)` and `b(φ_x)` depend on flux, which
//! lets the dynamics project `Z` and `X` once per step.
//!
//! 1D: `H = e²/(2C_sh)·n² − 2E_I cos(φ − φ_z/2) − 2αE_I·X(φ_x)·cos(2φ − φ_d)`.
//!
//! 2D, in the coordinates that diagonalise the kinetic term
//! (`φ0' = φ1 − φ0/2`, `φ1' = φ0/2`):
//! `H = e²/C_z·n0'² + e²/(2C_sh + (4α+1)C_z)·n1'² − 2E_I cos φ0' cos(φ1' − φ_z/2)
//!      − 2αE_I·X(φ_x)·cos(2φ1' − φ_d)`.
//! Original integer charges map to `n0' ≡ n1' (mod 2)`; the other parity
//! sector is unphysical and is dropped from the basis.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Basis, CMatrix, OperatorMatrix, SparseOp, Spectrum, C64};
use crate::units;

/// Device parameters. Currents in nA, capacitances in fF, offsets in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    #[serde(rename = "I_z_nA")]
    pub i_z: f64,
    #[serde(rename = "C_sh_fF")]
    pub c_sh: f64,
    #[serde(rename = "C_z_fF", default, skip_serializing_if = "Option::is_none")]
    pub c_z: Option<f64>,
    pub alpha: f64,
    pub d: f64,
    #[serde(rename = "phi_x_offset_rad", default)]
    pub phi_x_offset: f64,
    #[serde(rename = "phi_z_offset_rad", default)]
    pub phi_z_offset: f64,
}

impl CircuitParams {
    /// Spectroscopy fit of the single-mode model.
    pub fn fitted_1d() -> Self {
        Self { i_z: 228.0, c_sh: 70.0, c_z: None, alpha: 0.452, d: 0.102, phi_x_offset: 0.0, phi_z_offset: 0.0 }
    }

    /// Spectroscopy fit of the two-mode model.
    pub fn fitted_2d() -> Self {
        Self { i_z: 242.0, c_sh: 62.0, c_z: Some(4.85), alpha: 0.423, d: 0.102, phi_x_offset: 0.0, phi_z_offset: 0.0 }
    }

    pub fn with_d(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn with_offsets(mut self, phi_x_offset: f64, phi_z_offset: f64) -> Self {
        self.phi_x_offset = phi_x_offset;
        self.phi_z_offset = phi_z_offset;
        self
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        let finite = [self.i_z, self.c_sh, self.alpha, self.d, self.phi_x_offset, self.phi_z_offset]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if self.i_z <= 0.0 {
            return Err(Error::InvalidParams(format!("I_z must be positive, got {}", self.i_z)));
        }
        if self.c_sh <= 0.0 {
            return Err(Error::InvalidParams(format!("C_sh must be positive, got {}", self.c_sh)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParams(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.d.abs() >= 1.0 {
            return Err(Error::InvalidParams(format!("|d| must be below 1, got {}", self.d)));
        }
        if let Model::TwoD { .. } = model {
            match self.c_z {
                Some(c) if c > 0.0 && c.is_finite() => {}
                Some(c) => return Err(Error::InvalidParams(format!("C_z must be positive, got {c}"))),
                None => return Err(Error::InvalidParams("C_z is required by the 2D model".into())),
            }
        }
        Ok(())
    }

    /// Applied flux plus the constant offsets.
    pub fn effective_flux(&self, flux: FluxPoint) -> FluxPoint {
        FluxPoint { phi_x: flux.phi_x + self.phi_x_offset, phi_z: flux.phi_z + self.phi_z_offset }
    }
}

/// Barrier (`phi_x`) and tilt (`phi_z`) biases in phase units, `φ = 2πΦ/Φ0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    #[serde(rename = "phi_x_rad")]
    pub phi_x: f64,
    #[serde(rename = "phi_z_rad")]
    pub phi_z: f64,
}

impl FluxPoint {
    pub fn new(phi_x: f64, phi_z: f64) -> Self {
        Self { phi_x, phi_z }
    }
}

/// Circuit model and its charge-basis truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Model {
    #[serde(rename = "1d")]
    OneD { n: usize },
    #[serde(rename = "2d")]
    TwoD { n0: usize, n1: usize },
}

impl Model {
    pub const fn one_d() -> Self {
        Model::OneD { n: 30 }
    }

    /// Default 2D truncation; the slow mode needs `n1 ≈ 26` for ω02 to
    /// converge to 1e-6 GHz at the fitted parameters.
    pub const fn two_d() -> Self {
        Model::TwoD { n0: 8, n1: 26 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::OneD { .. } => "1d",
            Model::TwoD { .. } => "2d",
        }
    }

    pub fn basis(&self) -> Basis {
        match *self {
            Model::OneD { n } => Basis::Charge1D { n },
            Model::TwoD { n0, n1 } => Basis::Charge2D { n0, n1 },
        }
    }

    pub fn dim(&self) -> usize {
        self.basis().dim()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Model::OneD { n } if n < 5 => Err(Error::InvalidTruncation(format!("1D truncation N = {n} < 5"))),
            Model::TwoD { n0, n1 } if n0 < 4 || n1 < 4 => {
                Err(Error::InvalidTruncation(format!("2D truncation ({n0}, {n1}) below (4, 4)")))
            }
            _ => Ok(()),
        }
    }
}

/// `φ_d = arctan(d·tan(φ_x/2))` on the principal branch.
///
/// At `φ_x = (2k+1)π` the value is the limit from below, `sign(d)·π/2`.
pub fn phi_d(params: &CircuitParams, phi_x: f64) -> f64 {
    phi_d_for(params.d, phi_x)
}

pub fn phi_d_for(d: f64, phi_x: f64) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let c = (phi_x / 2.0).cos();
    if c == 0.0 {
        return d.signum() * PI / 2.0;
    }
    (d * (phi_x / 2.0).tan()).atan()
}

/// `cos(φ_x/2)·√(1 + tan²φ_d)`, evaluated as
/// `sign(cos(φ_x/2))·√(cos²(φ_x/2) + d² sin²(φ_x/2))`.
///
/// Where the cosine vanishes the sign is taken from the same side as
/// [`phi_d`], which keeps `X·cos(2φ − φ_d)` equal to the underlying
/// `d·sin(2φ)`-type term for either sign of `d`.
pub fn effective_x_factor(params: &CircuitParams, phi_x: f64) -> f64 {
    effective_x_factor_for(params.d, phi_x)
}

pub fn effective_x_factor_for(d: f64, phi_x: f64) -> f64 {
    let (s, c) = (phi_x / 2.0).sin_cos();
    let mag = (c * c + d * d * s * s).sqrt();
    if c == 0.0 {
        s.signum() * mag
    } else {
        c.signum() * mag
    }
}

/// Flux-dependent coefficients of the parametric form, in GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: C64,
    pub b: C64,
}

/// A circuit model with its flux-independent operators assembled.
#[derive(Debug, Clone)]
pub struct CircuitModel {
    pub params: CircuitParams,
    pub model: Model,
    /// Diagonal charging energies, GHz.
    pub kinetic: Vec<f64>,
    /// Shift operator multiplying `a`.
    pub z_shift: SparseOp,
    /// Shift operator multiplying `b`.
    pub x_shift: SparseOp,
    /// `I_z Φ0 / (2πh)`, GHz.
    pub e_i: f64,
    /// Prefactor of `a`: 1 (1D) or 1/2 (2D, product of two cosines).
    z_weight: f64,
}

impl CircuitModel {
    pub fn new(params: &CircuitParams, model: Model) -> Result<Self> {
        model.validate()?;
        params.validate(&model)?;
        let e_i = units::josephson_energy_ghz(params.i_z);
        let (kinetic, z_shift, x_shift, z_weight) = match model {
            Model::OneD { n } => {
                let ec = units::charging_energy_ghz(2.0 * params.c_sh);
                let n = n as i64;
                let charges: Vec<i64> = (-n..=n).collect();
                let dim = charges.len();
                let kinetic = charges.iter().map(|&q| ec * (q * q) as f64).collect();
                let z = SparseOp { dim, entries: (0..dim - 1).map(|i| (i + 1, i, 1.0)).collect() };
                let x = SparseOp { dim, entries: (0..dim - 2).map(|i| (i + 2, i, 1.0)).collect() };
                (kinetic, z, x, 1.0)
            }
            Model::TwoD { n0, n1 } => {
                let c_z = params.c_z.expect("validated");
                let e0 = units::charging_energy_ghz(c_z);
                let e1 = units::charging_energy_ghz(2.0 * params.c_sh + (4.0 * params.alpha + 1.0) * c_z);
                let states = charge2d_states(n0, n1);
                let dim = states.len();
                let index = |a: i64, b: i64| states.binary_search(&(a, b)).ok();
                let kinetic = states.iter().map(|&(a, b)| e0 * (a * a) as f64 + e1 * (b * b) as f64).collect();
                let mut z = Vec::new();
                let mut x = Vec::new();
                for (col, &(a, b)) in states.iter().enumerate() {
                    for da in [-1, 1] {
                        if let Some(row) = index(a + da, b + 1) {
                            z.push((row, col, 1.0));
                        }
                    }
                    if let Some(row) = index(a, b + 2) {
                        x.push((row, col, 1.0));
                    }
                }
                (kinetic, SparseOp { dim, entries: z }, SparseOp { dim, entries: x }, 0.5)
            }
        };
        Ok(Self { params: *params, model, kinetic, z_shift, x_shift, e_i, z_weight })
    }

    pub fn basis(&self) -> Basis {
        self.model.basis()
    }

    pub fn dim(&self) -> usize {
        self.kinetic.len()
    }

    /// Coefficients at an applied flux point (offsets are added here).
    pub fn coefficients(&self, flux: FluxPoint) -> Coefficients {
        let f = self.params.effective_flux(flux);
        let d = self.params.d;
        let a = -self.z_weight * self.e_i * C64::from_polar(1.0, -f.phi_z / 2.0);
        let b = -self.params.alpha * self.e_i * effective_x_factor_for(d, f.phi_x) * C64::from_polar(1.0, -phi_d_for(d, f.phi_x));
        Coefficients { a, b }
    }

    /// Assemble `T + aZ + a*Zᵀ + bX + b*Xᵀ` densely.
    pub fn assemble(&self, c: Coefficients) -> CMatrix {
        let n = self.dim();
        let mut h = CMatrix::zeros(n, n);
        for (i, &t) in self.kinetic.iter().enumerate() {
            h[(i, i)] = C64::new(t, 0.0);
        }
        for &(r, col, v) in &self.z_shift.entries {
            h[(r, col)] += c.a * v;
            h[(col, r)] += c.a.conj() * v;
        }
        for &(r, col, v) in &self.x_shift.entries {
            h[(r, col)] += c.b * v;
            h[(col, r)] += c.b.conj() * v;
        }
        h
    }

    /// Hamiltonian in GHz.
    pub fn hamiltonian(&self, flux: FluxPoint) -> OperatorMatrix {
        OperatorMatrix { basis: self.basis(), matrix: self.assemble(self.coefficients(flux)) }
    }

    /// `(i/2)·a·Z + h.c.` — the derivative `−∂H/∂φ_z` in GHz/rad.
    pub fn current_coefficient(&self, flux: FluxPoint) -> C64 {
        let a = self.coefficients(flux).a;
        C64::new(0.0, 0.5) * a
    }

    /// Persistent-current operator `−∂U/∂φ_z` in nA.
    pub fn persistent_current(&self, flux: FluxPoint) -> OperatorMatrix {
        let n = self.dim();
        let g = self.current_coefficient(flux) * units::na_per_ghz_per_rad();
        let mut m = CMatrix::zeros(n, n);
        for &(r, col, v) in &self.z_shift.entries {
            m[(r, col)] += g * v;
            m[(col, r)] += g.conj() * v;
        }
        OperatorMatrix { basis: self.basis(), matrix: m }
    }

    pub fn spectrum(&self, flux: FluxPoint, k: usize) -> Result<Spectrum> {
        linalg::eigensolve(&self.hamiltonian(flux), k)
    }

    /// Classical potential along the slow coordinate (`φ`, or `φ1'` at
    /// `φ0' = 0`), GHz.
    pub fn potential(&self, flux: FluxPoint, phi: f64) -> f64 {
        let f = self.params.effective_flux(flux);
        let d = self.params.d;
        -2.0 * self.e_i * (phi - f.phi_z / 2.0).cos()
            - 2.0 * self.params.alpha * self.e_i * effective_x_factor_for(d, f.phi_x) * (2.0 * phi - phi_d_for(d, f.phi_x)).cos()
    }

    /// Probability density of a charge-basis state along the slow phase
    /// coordinate, sampled at `grid`. For the 2D model the fast coordinate
    /// is integrated over one fundamental cell `φ0' ∈ [−π/2, π/2)`.
    pub fn phase_density(&self, state: &[C64], grid: &[f64]) -> Vec<f64> {
        match self.model {
            Model::OneD { n } => {
                let n = n as i64;
                grid.iter()
                    .map(|&phi| {
                        let mut psi = C64::new(0.0, 0.0);
                        for (k, c) in state.iter().enumerate() {
                            psi += c * C64::from_polar(1.0, (k as i64 - n) as f64 * phi);
                        }
                        psi.norm_sqr()
                    })
                    .collect()
            }
            Model::TwoD { n0, n1 } => {
                let states = charge2d_states(n0, n1);
                let fast: Vec<f64> = (0..32).map(|i| -PI / 2.0 + PI * (i as f64 + 0.5) / 32.0).collect();
                let width = 2 * n1 + 1;
                let mut density = vec![0.0; grid.len()];
                for &p0 in &fast {
                    let mut g = vec![C64::new(0.0, 0.0); width];
                    for (c, &(a, b)) in state.iter().zip(&states) {
                        g[(b + n1 as i64) as usize] += c * C64::from_polar(1.0, a as f64 * p0);
                    }
                    for (out, &phi) in density.iter_mut().zip(grid) {
                        let mut psi = C64::new(0.0, 0.0);
                        for (j, gj) in g.iter().enumerate() {
                            psi += gj * C64::from_polar(1.0, (j as i64 - n1 as i64) as f64 * phi);
                        }
                        *out += psi.norm_sqr();
                    }
                }
                density
            }
        }
    }
}

/// Charge states `(n0', n1')` of the physical sector, sorted.
pub(crate) fn charge2d_states(n0: usize, n1: usize) -> Vec<(i64, i64)> {
    let (n0, n1) = (n0 as i64, n1 as i64);
    let mut v = Vec::new();
    for a in -n0..=n0 {
        for b in -n1..=n1 {
            if (a - b).rem_euclid(2) == 0 {
                v.push((a, b));
            }
        }
    }
    v
}

pub fn build_h_1d(params: &CircuitParams, flux: FluxPoint, n: usize) -> Result<OperatorMatrix> {
    Ok(CircuitModel::new(params, Model::OneD { n })?.hamiltonian(flux))
}

pub fn build_h_2d(params: &CircuitParams, flux: FluxPoint, n0: usize, n1: usize) -> Result<OperatorMatrix> {
    Ok(CircuitModel::new(params, Model::TwoD { n0, n1 })?.hamiltonian(flux))
}

/// Persistent-current operator in nA for the given model and basis.
pub fn persistent_current_op(params: &CircuitParams, flux: FluxPoint, model: Model, basis: Basis) -> Result<OperatorMatrix> {
    if basis != model.basis() {
        return Err(Error::BasisMismatch(format!("{basis:?} does not belong to model {model:?}")));
    }
    Ok(CircuitModel::new(params, model)?.persistent_current(flux))
}

/// `ε_j − ε_i` in GHz.
pub fn transition_frequency(params: &CircuitParams, flux: FluxPoint, model: Model, i: usize, j: usize) -> Result<f64> {
    if i > j {
        return Err(Error::InvalidInput(format!("transition ({i}, {j}) requires i <= j")));
    }
    if i == j {
        return Ok(0.0);
    }
    let spec = CircuitModel::new(params, model)?.spectrum(flux, j + 1)?;
    Ok(spec.gap(i, j))
}

/// ω01 on a rectangular flux grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMap {
    pub phi_x: Vec<f64>,
    pub phi_z: Vec<f64>,
    /// `omega01[ix][iz]`, GHz.
    pub omega01: Vec<Vec<f64>>,
}

impl GapMap {
    /// Grid argmin over φ_z for each φ_x column.
    pub fn column_argmin(&self) -> Vec<f64> {
        self.omega01
            .iter()
            .map(|col| {
                let (k, _) = col.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, &w)| if w < acc.1 { (k, w) } else { acc });
                self.phi_z[k]
            })
            .collect()
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// ω01 over `phi_x_range × phi_z_range` with `resolution` points per axis,
/// evaluated point-parallel.
pub fn gap_map(
    params: &CircuitParams,
    model: Model,
    phi_x_range: (f64, f64),
    phi_z_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<GapMap> {
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::InvalidInput("gap map needs at least 2 points per axis".into()));
    }
    let finite = [phi_x_range.0, phi_x_range.1, phi_z_range.0, phi_z_range.1].iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidInput("gap map ranges must be finite".into()));
    }
    let cm = CircuitModel::new(params, model)?;
    let xs = linspace(phi_x_range.0, phi_x_range.1, resolution.0);
    let zs = linspace(phi_z_range.0, phi_z_range.1, resolution.1);
    let points: Vec<(usize, usize)> = (0..xs.len()).flat_map(|i| (0..zs.len()).map(move |j| (i, j))).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(i, j)| cm.spectrum(FluxPoint::new(xs[i], zs[j]), 2).map(|s| s.gap(0, 1)))
        .collect::<Result<_>>()?;
    let omega01 = values.chunks(zs.len()).map(|c| c.to_vec()).collect();
    Ok(GapMap { phi_x: xs, phi_z: zs, omega01 })
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimum-gap tilt at fixed barrier, searched in `[lo, hi]` to `tol` rad.
pub fn min_gap_phi_z(cm: &CircuitModel, phi_x: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    golden_section(|z| cm.spectrum(FluxPoint::new(phi_x, z), 2).map(|s| s.gap(0, 1)), lo, hi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> CircuitParams {
        CircuitParams::fitted_1d()
    }

    #[test]
    fn phi_d_values() {
        assert_eq!(phi_d(&p1(), 0.0), 0.0);
        assert_eq!(phi_d(&p1().with_d(0.0), 2.7), 0.0);
        assert!((phi_d(&p1(), PI / 2.0) - 0.102f64.atan()).abs() < 1e-15);
        assert!((phi_d(&p1(), PI / 2.0) - 0.101_649).abs() < 1e-6);
    }

    #[test]
    fn phi_d_at_odd_multiple_of_pi() {
        assert!((phi_d(&p1(), PI) - PI / 2.0).abs() < 1e-12);
        assert!((phi_d(&p1().with_d(-0.2), PI) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn x_factor_values() {
        assert!((effective_x_factor(&p1(), 2.0 * PI) + 1.0).abs() < 1e-15);
        assert!((effective_x_factor(&p1(), PI) - 0.102).abs() < 1e-12);
        for phi in [0.3, 1.7, 4.0, 5.9] {
            assert!((effective_x_factor(&p1().with_d(0.0), phi) - (phi / 2.0).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn x_factor_matches_secant_form_away_from_singularity() {
        for phi in [0.4, 2.0, 3.5, 5.0, 7.7] {
            let pd = phi_d(&p1(), phi);
            let direct = (phi / 2.0).cos() * (1.0 + pd.tan().powi(2)).sqrt();
            assert!((direct - effective_x_factor(&p1(), phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn charge_basis_cosine_element() {
        // with zero barrier coefficient, ⟨n+1|H|n⟩ = −2E_I · ½
        let h = build_h_1d(&p1(), FluxPoint::new(PI, 0.0), 10).unwrap();
        let e_i = units::josephson_energy_ghz(228.0);
        assert!((h.matrix[(6, 5)].re + e_i).abs() < 1e-12);
        assert!(h.is_hermitian());
    }

    #[test]
    fn two_d_is_hermitian() {
        let h = build_h_2d(&CircuitParams::fitted_2d(), FluxPoint::new(1.7 * PI, 0.03), 6, 10).unwrap();
        assert!(h.is_hermitian());
        assert_eq!(h.dim(), linalg::charge2d_dim(6, 10));
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = CircuitParams { alpha: 1.2, ..p1() };
        assert!(matches!(build_h_1d(&bad, FluxPoint::new(0.0, 0.0), 10), Err(Error::InvalidParams(_))));
        assert!(matches!(build_h_1d(&p1(), FluxPoint::new(0.0, 0.0), 3), Err(Error::InvalidTruncation(_))));
        assert!(matches!(build_h_2d(&p1(), FluxPoint::new(0.0, 0.0), 6, 10), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn transition_ordering() {
        let f = FluxPoint::new(1.6 * PI, 0.01);
        assert_eq!(transition_frequency(&p1(), f, Model::one_d(), 0, 0).unwrap(), 0.0);
        let w01 = transition_frequency(&p1(), f, Model::one_d(), 0, 1).unwrap();
        let w02 = transition_frequency(&p1(), f, Model::one_d(), 0, 2).unwrap();
        assert!(w02 >= w01 && w01 > 0.0);
    }

    #[test]
    fn persistent_current_matches_finite_difference() {
        let cm = CircuitModel::new(&p1(), Model::OneD { n: 15 }).unwrap();
        let f = FluxPoint::new(1.8 * PI, 0.02);
        let h = 1e-5;
        let hp = cm.hamiltonian(FluxPoint::new(f.phi_x, f.phi_z + h)).matrix;
        let hm = cm.hamiltonian(FluxPoint::new(f.phi_x, f.phi_z - h)).matrix;
        let fd = -(hp - hm) / C64::new(2.0 * h, 0.0) * C64::new(units::na_per_ghz_per_rad(), 0.0);
        let ip = cm.persistent_current(f).matrix;
        let scale = linalg::max_abs(&ip);
        assert!(linalg::max_abs(&(fd - &ip)) < 1e-8 * scale);
    }

    #[test]
    fn serde_uses_unit_suffixed_names() {
        let s = serde_json::to_string(&CircuitParams::fitted_2d()).unwrap();
        assert!(s.contains("\"I_z_nA\":242") && s.contains("\"C_z_fF\":4.85"));
        let back: CircuitParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, CircuitParams::fitted_2d());
        let typo = r#"{"I_z_nA":228,"C_sh_fF":70,"alpha":0.452,"d":0.1,"dd":0}"#;
        assert!(serde_json::from_str::<CircuitParams>(typo).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section(|x| Ok((x - 0.3) * (x - 0.3)), -1.0, 2.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
    }
}
