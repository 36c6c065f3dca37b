//! Junction-asymmetry extraction from the tilt symmetry point at several
//! barrier biases.
//!
//! Each column is a readout signal along φ_z at fixed φ_x. The synthetic
//! signal is a Gaussian in ω01 centred on the gap minimum,
//! `S = exp(−(ω01 − ω_min)²/(2s²))`; only the position of its peak is used.
//! A Gaussian in φ_z is fitted per column, and the centres are fitted to
//! `φ_d(d, φ_x + δ_x) − δ_z`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{self, levenberg_marquardt};
use crate::circuit::{linspace, min_gap_phi_z, phi_d_for, CircuitModel, CircuitParams, FluxPoint, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymmetryConfig {
    pub phi_x_rad: Vec<f64>,
    /// Windows are centred on `φ_d(d_guess, φ_x)`.
    pub d_guess: f64,
    pub window_half_width_rad: f64,
    pub points: usize,
    pub signal_width_ghz: f64,
    /// Additive Gaussian noise on the unit-height signal.
    pub noise: f64,
    /// Fit-region variations, as fractions of the window half-width around
    /// each column's first-pass centre.
    pub fit_fractions: Vec<f64>,
}

impl Default for AsymmetryConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            phi_x_rad: (0..14).map(|i| (1.35 + 0.1 * i as f64) * pi).collect(),
            d_guess: 0.1,
            window_half_width_rad: 0.05,
            points: 81,
            signal_width_ghz: 0.5,
            noise: 0.02,
            fit_fractions: vec![1.0, 0.8, 0.6],
        }
    }
}

impl AsymmetryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phi_x_rad.len() < 3 {
            return Err(Error::InvalidConfig("asymmetry extraction needs at least 3 φ_x columns".into()));
        }
        let pi = std::f64::consts::PI;
        if self.phi_x_rad.iter().any(|&x| !(x > pi && x < 3.0 * pi)) {
            return Err(Error::InvalidConfig("φ_x columns must lie inside (π, 3π)".into()));
        }
        if !(self.window_half_width_rad > 0.0 && self.signal_width_ghz > 0.0 && self.noise >= 0.0) || self.points < 7 {
            return Err(Error::InvalidConfig("asymmetry window, signal width and point count must be positive".into()));
        }
        if !(self.d_guess.abs() < 1.0) {
            return Err(Error::InvalidConfig("d_guess must satisfy |d| < 1".into()));
        }
        if self.fit_fractions.is_empty() || self.fit_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::InvalidConfig("fit fractions must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Readout signal along φ_z at one barrier bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalColumn {
    pub phi_x_rad: f64,
    pub phi_z_rad: Vec<f64>,
    pub signal: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryPoint {
    pub phi_x_rad: f64,
    pub center_rad: f64,
    pub center_err_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryFitResult {
    pub d: f64,
    pub d_err: f64,
    pub phi_x_offset_rad: f64,
    pub phi_x_offset_err_rad: f64,
    pub phi_z_offset_rad: f64,
    pub phi_z_offset_err_rad: f64,
    pub points: Vec<SymmetryPoint>,
    /// Columns whose Gaussian fit failed, with the reason.
    pub skipped: Vec<(f64, String)>,
    /// `d` from each fit-region variation.
    pub d_by_region: Vec<f64>,
}

/// Synthetic columns from `truth` (its offsets and `d` included), with
/// seeded additive noise.
pub fn synthesize_asymmetry_signal(truth: &CircuitParams, model: Model, config: &AsymmetryConfig, seed: u64) -> Result<Vec<SignalColumn>> {
    config.validate()?;
    let cm = CircuitModel::new(truth, model)?;
    let clean: Vec<SignalColumn> = config
        .phi_x_rad
        .par_iter()
        .map(|&x| {
            let c = phi_d_for(config.d_guess, x);
            let (lo, hi) = (c - config.window_half_width_rad, c + config.window_half_width_rad);
            let zmin = min_gap_phi_z(&cm, x, lo - config.window_half_width_rad, hi + config.window_half_width_rad, 1e-10)?;
            let wmin = cm.spectrum(FluxPoint::new(x, zmin), 2)?.gap(0, 1);
            let zs = linspace(lo, hi, config.points);
            let signal = zs
                .iter()
                .map(|&z| {
                    let w = cm.spectrum(FluxPoint::new(x, z), 2)?.gap(0, 1);
                    Ok((-(w - wmin).powi(2) / (2.0 * config.signal_width_ghz.powi(2))).exp())
                })
                .collect::<Result<_>>()?;
            Ok(SignalColumn { phi_x_rad: x, phi_z_rad: zs, signal })
        })
        .collect::<Result<_>>()?;
    let mut rng = fit::rng(seed);
    Ok(clean
        .into_iter()
        .map(|mut col| {
            for s in &mut col.signal {
                let z: f64 = StandardNormal.sample(&mut rng);
                *s += config.noise * z;
            }
            col
        })
        .collect())
}

/// Least-squares `A·exp(−(x − c)²/(2s²)) + B`; returns `(c, σ_c)` with the
/// error from the Gauss–Newton covariance scaled by the residual variance.
pub fn fit_gaussian(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 6 {
        return Err(Error::GaussianFitFailed(format!("{n} points")));
    }
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let base = fit::median(y);
    let span = x[n - 1] - x[0];
    let half = base + 0.5 * (ymax - base);
    let above = y.iter().filter(|v| **v > half).count().max(1) as f64;
    let s0 = (above * span / (n - 1) as f64 / 2.355).max(span / n as f64);
    let model = |q: &[f64], xi: f64| q[0] * (-(xi - q[1]).powi(2) / (2.0 * q[2].exp().powi(2))).exp() + q[3];
    let res = |q: &[f64]| Some(x.iter().zip(y).map(|(xi, yi)| model(q, *xi) - yi).collect::<Vec<_>>());
    let q0 = [ymax - base, x[imax], s0.ln(), base];
    let (q, cost) = levenberg_marquardt(&res, &q0, 1e-7).ok_or_else(|| Error::GaussianFitFailed("least squares did not run".into()))?;
    let (amp, c, s) = (q[0], q[1], q[2].exp());
    if !(amp > 0.0 && c > x[0] && c < x[n - 1] && s.is_finite() && s < span) {
        return Err(Error::GaussianFitFailed(format!("centre {c:.4} / width {s:.3e} / amplitude {amp:.3e} outside the window")));
    }
    // covariance of the centre from JᵀJ
    let h = 1e-7 * (1.0 + c.abs());
    let jac = |k: usize, dx: f64| {
        let mut p = q.clone();
        p[k] += dx;
        p
    };
    let cols: Vec<Vec<f64>> = (0..4)
        .map(|k| {
            let dk = if k == 1 { h } else { 1e-7 * (1.0 + q[k].abs()) };
            let (qp, qm) = (jac(k, dk), jac(k, -dk));
            x.iter().map(|&xi| (model(&qp, xi) - model(&qm, xi)) / (2.0 * dk)).collect()
        })
        .collect();
    let jtj = nalgebra::DMatrix::from_fn(4, 4, |a, b| cols[a].iter().zip(&cols[b]).map(|(u, v)| u * v).sum::<f64>());
    let var = 2.0 * cost / (n - 4) as f64;
    let err = jtj.try_inverse().map(|inv| (inv[(1, 1)] * var).sqrt()).unwrap_or(f64::NAN);
    if !err.is_finite() {
        return Err(Error::GaussianFitFailed("singular centre covariance".into()));
    }
    Ok((c, err))
}

/// Fit `[d, δ_x, δ_z]` to symmetry points.
fn fit_symmetry(points: &[SymmetryPoint], d0: f64) -> Result<Vec<f64>> {
    if points.len() < 4 {
        return Err(Error::InsufficientData { have: points.len(), need: 4 });
    }
    let res = |q: &[f64]| {
        Some(points.iter().map(|p| (phi_d_for(q[0], p.phi_x_rad + q[1]) - q[2] - p.center_rad) / p.center_err_rad.max(1e-12)).collect::<Vec<_>>())
    };
    let (q, _) = levenberg_marquardt(&res, &[d0, 0.0, 0.0], 1e-7).ok_or_else(|| Error::FitDiverged("symmetry-point fit did not run".into()))?;
    if !(q[0].abs() < 1.0) || q.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitDiverged(format!("asymmetry fit gave d = {}", q[0])));
    }
    Ok(q)
}

fn centers(columns: &[SignalColumn], windows: &[Option<(f64, f64)>]) -> (Vec<SymmetryPoint>, Vec<(f64, String)>) {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (col, win) in columns.iter().zip(windows) {
        let (x, y): (Vec<f64>, Vec<f64>) = col
            .phi_z_rad
            .iter()
            .zip(&col.signal)
            .filter(|(z, _)| win.map_or(true, |(lo, hi)| **z >= lo && **z <= hi))
            .map(|(z, s)| (*z, *s))
            .unzip();
        match fit_gaussian(&x, &y) {
            Ok((c, e)) => points.push(SymmetryPoint { phi_x_rad: col.phi_x_rad, center_rad: c, center_err_rad: e }),
            Err(e) => skipped.push((col.phi_x_rad, e.to_string())),
        }
    }
    (points, skipped)
}

/// Fit every column, then the symmetry points; `d` uncertainty combines a
/// delete-one-column jackknife with the spread over fit-region variations.
pub fn extract_asymmetry(columns: &[SignalColumn], config: &AsymmetryConfig) -> Result<AsymmetryFitResult> {
    config.validate()?;
    let (points, skipped) = centers(columns, &vec![None; columns.len()]);
    let q = fit_symmetry(&points, config.d_guess)?;

    // jackknife over columns
    let n = points.len();
    let mut jack = Vec::with_capacity(n);
    for i in 0..n {
        let sub: Vec<SymmetryPoint> = points.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
        if let Ok(v) = fit_symmetry(&sub, q[0]) {
            jack.push(v);
        }
    }
    let jk_err = |k: usize| {
        let m = jack.len() as f64;
        if m < 2.0 {
            return 0.0;
        }
        let vals: Vec<f64> = jack.iter().map(|v| v[k]).collect();
        let mean = fit::mean(&vals);
        ((m - 1.0) / m * vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
    };

    // fit-region variations around the first-pass centres
    let mut d_by_region = Vec::new();
    for &frac in &config.fit_fractions {
        let windows: Vec<Option<(f64, f64)>> = columns
            .iter()
            .map(|col| {
                points.iter().find(|p| p.phi_x_rad == col.phi_x_rad).map(|p| {
                    let h = frac * config.window_half_width_rad;
                    (p.center_rad - h, p.center_rad + h)
                })
            })
            .collect();
        let (pts, _) = centers(columns, &windows);
        if let Ok(v) = fit_symmetry(&pts, q[0]) {
            d_by_region.push(v[0]);
        }
    }
    let systematic = fit::std_dev(&d_by_region);

    Ok(AsymmetryFitResult {
        d: q[0],
        d_err: (jk_err(0).powi(2) + systematic.powi(2)).sqrt(),
        phi_x_offset_rad: q[1],
        phi_x_offset_err_rad: jk_err(1),
        phi_z_offset_rad: q[2],
        phi_z_offset_err_rad: jk_err(2),
        points,
        skipped,
        d_by_region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units;

    fn fast() -> Model {
        Model::OneD { n: 20 }
    }

    #[test]
    fn gaussian_fit_recovers_center() {
        let x = linspace(-1.0, 1.0, 61);
        let y: Vec<f64> = x.iter().map(|v| 0.8 * (-(v - 0.123f64).powi(2) / (2.0 * 0.2f64.powi(2))).exp() + 0.1).collect();
        let (c, _) = fit_gaussian(&x, &y).unwrap();
        assert!((c - 0.123).abs() < 1e-8);
        assert!(matches!(fit_gaussian(&x, &vec![0.3; 61]), Err(Error::GaussianFitFailed(_))));
    }

    #[test]
    fn offsets_recovered() {
        let truth = CircuitParams::fitted_1d().with_offsets(units::mphi0_to_rad(3.0), units::mphi0_to_rad(-3.0));
        let cfg = AsymmetryConfig::default();
        let cols = synthesize_asymmetry_signal(&truth, fast(), &cfg, 5).unwrap();
        let r = extract_asymmetry(&cols, &cfg).unwrap();
        assert!((r.d - 0.102).abs() < 0.005, "{r:?}");
        assert!((r.phi_x_offset_rad - truth.phi_x_offset).abs() < r.phi_x_offset_err_rad.max(1e-4), "{r:?}");
        assert!((r.phi_z_offset_rad - truth.phi_z_offset).abs() < r.phi_z_offset_err_rad.max(1e-4), "{r:?}");
    }

    #[test]
    fn symmetric_device() {
        let truth = CircuitParams::fitted_1d().with_d(0.0);
        let cfg = AsymmetryConfig { d_guess: 0.0, ..Default::default() };
        let cols = synthesize_asymmetry_signal(&truth, fast(), &cfg, 9).unwrap();
        let r = extract_asymmetry(&cols, &cfg).unwrap();
        let spread = r.points.iter().map(|p| p.center_rad.abs()).fold(0.0, f64::max);
        assert!(spread < 1e-3, "{spread}");
        assert!(r.d.abs() < 3.0 * r.d_err.max(1e-4), "{r:?}");
    }
}
