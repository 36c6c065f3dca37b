//! Ohmic bath: spectral function γ(ω) and its principal-value transform S(ω).
//!
//! Frequencies here are angular (rad/ns). The system–bath coupling operator
//! is the persistent current expressed as an energy per unit phase in the
//! same angular units (`2π · GHz/rad`), so that `γ(ω)·|⟨a|I_p|b⟩|²` is a rate
//! in 1/ns and `η g²` carries units of inverse energy squared.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quad;
use crate::error::{Error, Result};
use crate::units;

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathParams {
    pub eta_g2: f64,
    #[serde(rename = "temperature_mK")]
    pub temperature_mk: f64,
    /// Cutoff `ω_c/2π`.
    #[serde(rename = "omega_c_GHz")]
    pub omega_c_ghz: f64,
    #[serde(default = "default_true")]
    pub lamb_shift: bool,
    #[serde(rename = "bohr_bin_tol_GHz")]
    pub bohr_bin_tol_ghz: f64,
}

impl Default for BathParams {
    fn default() -> Self {
        Self { eta_g2: 3e-6, temperature_mk: 10.0, omega_c_ghz: 15.0, lamb_shift: true, bohr_bin_tol_ghz: 1e-3 }
    }
}

impl BathParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_g2 >= 0.0 && self.eta_g2.is_finite()) {
            return Err(Error::InvalidBath(format!("eta_g2 must be non-negative, got {}", self.eta_g2)));
        }
        if !(self.temperature_mk > 0.0 && self.temperature_mk.is_finite()) {
            return Err(Error::InvalidBath(format!("temperature must be positive, got {}", self.temperature_mk)));
        }
        if !(self.omega_c_ghz > 0.0 && self.omega_c_ghz.is_finite()) {
            return Err(Error::InvalidBath(format!("cutoff must be positive, got {}", self.omega_c_ghz)));
        }
        if !(self.bohr_bin_tol_ghz >= 0.0) {
            return Err(Error::InvalidBath(format!("bin tolerance must be non-negative, got {}", self.bohr_bin_tol_ghz)));
        }
        Ok(())
    }

    /// `ħ/(k_B T)` in ns.
    pub fn beta(&self) -> f64 {
        units::beta_angular_ns(self.temperature_mk)
    }

    /// Angular cutoff, rad/ns.
    pub fn omega_c(&self) -> f64 {
        units::ghz_to_angular(self.omega_c_ghz)
    }
}

/// `γ(ω) = η g² · 2πω e^{−|ω|/ω_c} / (1 − e^{−βω})`, ω in rad/ns.
/// At ω = 0 the analytic limit `2π η g² / β` is returned.
pub fn gamma(bath: &BathParams, omega: f64) -> f64 {
    gamma_raw(bath.eta_g2, bath.beta(), bath.omega_c(), omega)
}

#[inline]
fn gamma_raw(eta_g2: f64, beta: f64, omega_c: f64, omega: f64) -> f64 {
    let x = beta * omega;
    // ω / (1 − e^{−βω}), with its series near zero
    let bose = if x.abs() < 1e-6 { (1.0 + x / 2.0 + x * x / 12.0) / beta } else { omega / -(-x).exp_m1() };
    eta_g2 * 2.0 * PI * (-omega.abs() / omega_c).exp() * bose
}

/// Default smallest exclusion half-width for the principal value, rad/ns.
fn base_window(bath: &BathParams) -> f64 {
    1e-2 * (1.0 / bath.beta()).min(bath.omega_c())
}

/// `(1/2π) ∫_ε^U [γ(ω−u) − γ(ω+u)]/u du`: the principal-value integral with
/// the symmetric window `(ω−ε, ω+ε)` removed.
pub fn lamb_shift_window(bath: &BathParams, omega: f64, eps: f64) -> f64 {
    if bath.eta_g2 == 0.0 {
        return 0.0;
    }
    let (eta, beta, wc) = (bath.eta_g2, bath.beta(), bath.omega_c());
    let tb = 1.0 / beta;
    let upper = omega.abs() + 60.0 * wc + 60.0 * tb;
    let w = omega.abs();
    let mut pts = vec![eps, upper];
    for p in [0.1 * tb, tb, 10.0 * tb, w - 10.0 * tb, w - tb, w, w + tb, w + 10.0 * tb, wc, 5.0 * wc, 20.0 * wc] {
        if p > eps && p < upper {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let f = |u: f64| (gamma_raw(eta, beta, wc, omega - u) - gamma_raw(eta, beta, wc, omega + u)) / u;
    let scale = eta * wc;
    let (v, _) = quad::integrate(f, &pts, 1e-15 * scale, 1e-13, 4000);
    v / (2.0 * PI)
}

/// `S(ω) = ∫ dω'/2π γ(ω') 𝒫 1/(ω − ω')`, rad/ns.
///
/// The excluded window is shrunk ε → ε/2 → ε/4 and Richardson-extrapolated;
/// the truncation error of the windowed integral has only odd powers of ε.
#[allow(non_snake_case)]
pub fn lamb_shift_S(bath: &BathParams, omega: f64) -> Result<f64> {
    if bath.eta_g2 == 0.0 {
        return Ok(0.0);
    }
    let eps = base_window(bath);
    let i0 = lamb_shift_window(bath, omega, eps);
    let i1 = lamb_shift_window(bath, omega, eps / 2.0);
    let i2 = lamb_shift_window(bath, omega, eps / 4.0);
    let r1 = 2.0 * i1 - i0;
    let r2 = 2.0 * i2 - i1;
    let s = (8.0 * r2 - r1) / 7.0;
    let spread = (s - r2).abs();
    let floor = 1e-9 * bath.eta_g2 * bath.omega_c();
    if spread > 1e-6 * s.abs() + floor {
        return Err(Error::LambShiftNonConvergence { omega, spread });
    }
    Ok(s)
}

/// Catmull–Rom table of S(ω) on a grid uniform in `asinh(ω / 1 rad/ns)`.
#[derive(Debug, Clone)]
pub struct LambTable {
    s_min: f64,
    ds: f64,
    values: Vec<f64>,
}

const TABLE_POINTS: usize = 4001;
/// Table range `|ω|/2π ≤ 500 GHz`.
const TABLE_RANGE: f64 = 2.0 * PI * 500.0;

impl LambTable {
    pub fn build(bath: &BathParams) -> Result<Self> {
        let s_max = TABLE_RANGE.asinh();
        let s_min = -s_max;
        let ds = (s_max - s_min) / (TABLE_POINTS - 1) as f64;
        let values = (0..TABLE_POINTS).map(|i| lamb_shift_S(bath, (s_min + ds * i as f64).sinh())).collect::<Result<Vec<_>>>()?;
        Ok(Self { s_min, ds, values })
    }

    /// Interpolated S(ω); `None` outside the tabulated range.
    pub fn eval(&self, omega: f64) -> Option<f64> {
        let x = (omega.asinh() - self.s_min) / self.ds;
        let n = self.values.len();
        if !(0.0..=(n - 1) as f64).contains(&x) {
            return None;
        }
        let i = (x.floor() as usize).min(n - 2);
        let t = x - i as f64;
        let p1 = self.values[i];
        let p2 = self.values[i + 1];
        let p0 = if i > 0 { self.values[i - 1] } else { 2.0 * p1 - p2 };
        let p3 = if i + 2 < n { self.values[i + 2] } else { 2.0 * p2 - p1 };
        let (t2, t3) = (t * t, t * t * t);
        Some(0.5 * (2.0 * p1 + (p2 - p0) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3))
    }
}

/// Bath with precomputed inverse temperature and Lamb-shift table.
#[derive(Debug, Clone)]
pub struct Bath {
    pub params: BathParams,
    beta: f64,
    omega_c: f64,
    table: Option<LambTable>,
}

impl Bath {
    pub fn new(params: &BathParams) -> Result<Self> {
        params.validate()?;
        let table = if params.lamb_shift && params.eta_g2 > 0.0 { Some(LambTable::build(params)?) } else { None };
        Ok(Self { params: *params, beta: params.beta(), omega_c: params.omega_c(), table })
    }

    pub fn gamma(&self, omega: f64) -> f64 {
        gamma_raw(self.params.eta_g2, self.beta, self.omega_c, omega)
    }

    /// S(ω) in rad/ns, or zero when the Lamb shift is switched off.
    pub fn lamb_shift(&self, omega: f64) -> Result<f64> {
        match &self.table {
            None => Ok(0.0),
            Some(t) => match t.eval(omega) {
                Some(v) => Ok(v),
                None => lamb_shift_S(&self.params, omega),
            },
        }
    }

    pub fn is_closed(&self) -> bool {
        self.params.eta_g2 == 0.0
    }

    /// Bin tolerance in rad/ns.
    pub fn bin_tol(&self) -> f64 {
        units::ghz_to_angular(self.params.bohr_bin_tol_ghz)
    }
}
