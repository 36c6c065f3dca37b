//! S-curves: right-well probability versus initial tilt after a barrier
//! anneal, with quasistatic tilt noise and binomial shot noise, and the
//! `½[1 + tanh((φ_z − φ_z0)/w)]` width fit.

use std::f64::consts::PI;

use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::broaden::interpolate;
use super::fit::{self, levenberg_marquardt};
use super::scan::{adaptive_scan, Refinement};
use crate::circuit::{linspace, CircuitParams, FluxPoint, Model};
use crate::dynamics::{evolve_closed, evolve_open, Bath, BathParams, CircuitDrive, SolverConfig};
use crate::error::{Error, Result};
use crate::path::{build_path, PathSpec, RiseShape};
use crate::readout::{p_right, povm_right, ReadoutModel};
use crate::units;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SCurveConfig {
    pub phi_x_start_rad: f64,
    pub phi_x_end_rad: f64,
    pub ramp: RiseShape,
    /// Gaussian: 5–95 % rise time; linear: ramp duration.
    pub anneal_time_ns: f64,
    pub correction: bool,
    /// Asymmetry used to build the correction; the device value when absent.
    pub applied_d: Option<f64>,
    pub phi_z_min_mphi0: f64,
    pub phi_z_max_mphi0: f64,
    pub points: usize,
    /// Standard deviation of the quasistatic tilt offset; 0 disables.
    pub noise_sigma_mphi0: f64,
    pub quadrature_order: usize,
    /// Binomial shots per point; 0 reports the exact probabilities.
    pub shots: u64,
    /// Adaptive grid for the noiseless curve.
    pub refine: Refinement,
    pub solver: SolverConfig,
    /// Open-system evolution when present.
    pub bath: Option<BathParams>,
    pub readout: ReadoutModel,
    pub resamples: usize,
}

impl Default for SCurveConfig {
    fn default() -> Self {
        Self {
            phi_x_start_rad: 1.1 * PI,
            phi_x_end_rad: 2.0 * PI,
            ramp: RiseShape::Gaussian,
            anneal_time_ns: 20.0,
            correction: false,
            applied_d: None,
            phi_z_min_mphi0: -24.0,
            phi_z_max_mphi0: 6.0,
            points: 61,
            noise_sigma_mphi0: 1.0,
            quadrature_order: 7,
            shots: 1000,
            refine: Refinement { coarse_step_mphi0: 2.0, min_step_mphi0: 0.05, max_dp: 0.04, max_points: 200 },
            solver: SolverConfig { rel_tol: 1e-5, abs_tol: 1e-7, output_points: 2, ..Default::default() },
            bath: None,
            readout: ReadoutModel::default(),
            resamples: 100,
        }
    }
}

impl SCurveConfig {
    pub fn validate(&self, model: &Model) -> Result<()> {
        if !(self.phi_z_max_mphi0 > self.phi_z_min_mphi0) {
            return Err(Error::InvalidConfig("s-curve tilt range is empty".into()));
        }
        if self.points < 5 {
            return Err(Error::InvalidConfig(format!("s-curve needs at least 5 points, got {}", self.points)));
        }
        if !(self.noise_sigma_mphi0 >= 0.0 && self.noise_sigma_mphi0.is_finite()) {
            return Err(Error::InvalidConfig("noise_sigma_mphi0 must be non-negative".into()));
        }
        if self.noise_sigma_mphi0 > 0.0 && self.quadrature_order == 0 {
            return Err(Error::InvalidConfig("quadrature_order must be positive".into()));
        }
        if let Some(d) = self.applied_d {
            if !(d.abs() < 1.0) {
                return Err(Error::InvalidConfig(format!("applied d must satisfy |d| < 1, got {d}")));
            }
        }
        if let Some(b) = &self.bath {
            b.validate()?;
        }
        self.readout.validate()?;
        self.refine.validate()?;
        self.solver.validate(model.dim())?;
        self.path_spec(0.0).validate()
    }

    pub fn path_spec(&self, phi_z: f64) -> PathSpec {
        let start = FluxPoint::new(self.phi_x_start_rad, phi_z);
        let end = FluxPoint::new(self.phi_x_end_rad, phi_z);
        let spec = match self.ramp {
            RiseShape::Gaussian => PathSpec::gaussian(start, end, self.anneal_time_ns),
            RiseShape::Linear => PathSpec::linear(start, end, self.anneal_time_ns),
        };
        spec.with_correction(self.correction)
    }

    pub fn grid(&self) -> Vec<f64> {
        linspace(units::mphi0_to_rad(self.phi_z_min_mphi0), units::mphi0_to_rad(self.phi_z_max_mphi0), self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SCurveFit {
    pub width_mphi0: f64,
    pub width_err_mphi0: f64,
    pub center_mphi0: f64,
    pub center_err_mphi0: f64,
    /// Unweighted RMS of `P − model`.
    pub rms_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SCurveResult {
    /// rad
    pub phi_z: Vec<f64>,
    /// Noise-averaged probability.
    pub p_right: Vec<f64>,
    /// Shot-sampled estimate (equal to `p_right` when `shots = 0`).
    pub p_measured: Vec<f64>,
    pub sigma: Vec<f64>,
    pub shots: u64,
    pub correction: bool,
    /// Asymmetry the correction was built from (0 when uncorrected).
    pub applied_d: f64,
    /// Noiseless curve on the refined grid used for the noise average.
    pub noiseless_phi_z: Vec<f64>,
    pub noiseless_p_right: Vec<f64>,
    pub fit: SCurveFit,
}

/// Right-well probability after one anneal started at tilt `phi_z`, without
/// tilt noise.
pub fn scurve_point(params: &CircuitParams, model: Model, config: &SCurveConfig, bath: Option<&Bath>, phi_z: f64) -> Result<f64> {
    let d = config.applied_d.unwrap_or(params.d);
    let path = build_path(&config.path_spec(phi_z), d)?;
    let drive = CircuitDrive::new(params, &path, model)?;
    let r = match bath {
        Some(b) => evolve_open(&drive, b, &config.solver)?,
        None => evolve_closed(&drive, &config.solver)?,
    };
    Ok(p_right(&r.final_state, &povm_right(&r.final_ip, &config.readout)?)?.clamp(0.0, 1.0))
}

pub fn run_scurve(params: &CircuitParams, model: Model, config: &SCurveConfig, seed: u64) -> Result<SCurveResult> {
    params.validate(&model)?;
    config.validate(&model)?;
    let bath = config.bath.as_ref().map(Bath::new).transpose()?;
    let grid = config.grid();
    let nodes = if config.noise_sigma_mphi0 > 0.0 {
        fit::normal_quadrature(config.quadrature_order, units::mphi0_to_rad(config.noise_sigma_mphi0))
    } else {
        vec![(0.0, 1.0)]
    };
    let reach = nodes.iter().map(|n| n.0.abs()).fold(0.0, f64::max);
    let lo = grid[0] - reach;
    let hi = grid[grid.len() - 1] + reach;

    let curve = adaptive_scan(|z| scurve_point(params, model, config, bath.as_ref(), z), |p: &f64| vec![*p], lo, hi, &config.refine)?;
    let (zs, ps): (Vec<f64>, Vec<f64>) = curve.into_iter().unzip();

    let p_right: Vec<f64> = grid
        .par_iter()
        .map(|&z| nodes.iter().map(|(dz, w)| w * interpolate(&zs, &ps, z + dz)).sum::<f64>().clamp(0.0, 1.0))
        .collect();
    let (p_measured, sigma) = sample_shots(&p_right, config.shots, seed)?;
    let fit = fit_scurve_width(&grid, &p_measured, &sigma, &SCurveFitOptions { resamples: config.resamples, seed, ..Default::default() })?;
    Ok(SCurveResult {
        phi_z: grid,
        p_right,
        p_measured,
        sigma,
        shots: config.shots,
        correction: config.correction,
        applied_d: if config.correction { config.applied_d.unwrap_or(params.d) } else { 0.0 },
        noiseless_phi_z: zs,
        noiseless_p_right: ps,
        fit,
    })
}

/// Binomial sampling with Laplace-smoothed standard errors
/// `√(p̃(1−p̃)/n)`, `p̃ = (k+1)/(n+2)`. With `shots = 0` the probabilities
/// are returned unchanged with unit weights.
pub fn sample_shots(p: &[f64], shots: u64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if shots == 0 {
        return Ok((p.to_vec(), vec![1.0; p.len()]));
    }
    let mut rng = fit::rng(seed);
    let n = shots as f64;
    let mut out = Vec::with_capacity(p.len());
    let mut sig = Vec::with_capacity(p.len());
    for &pi in p {
        let k = Binomial::new(shots, pi.clamp(0.0, 1.0)).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(&mut rng) as f64;
        let pt = (k + 1.0) / (n + 2.0);
        out.push(k / n);
        sig.push((pt * (1.0 - pt) / n).sqrt());
    }
    Ok((out, sig))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCurveFitOptions {
    pub resamples: usize,
    pub seed: u64,
    /// Fits with a larger unweighted RMS residual are rejected.
    pub max_rms: f64,
}

impl Default for SCurveFitOptions {
    fn default() -> Self {
        Self { resamples: 100, seed: 0, max_rms: 0.1 }
    }
}

pub fn tanh_model(phi_z_mphi0: f64, center_mphi0: f64, width_mphi0: f64) -> f64 {
    0.5 * (1.0 + ((phi_z_mphi0 - center_mphi0) / width_mphi0).tanh())
}

/// Weighted least-squares fit of `(w, φ_z0)`; uncertainties from a
/// parametric resample of the data within `sigma`.
pub fn fit_scurve_width(phi_z: &[f64], p: &[f64], sigma: &[f64], opts: &SCurveFitOptions) -> Result<SCurveFit> {
    let n = phi_z.len();
    if n < 5 {
        return Err(Error::InsufficientData { have: n, need: 5 });
    }
    if p.len() != n || sigma.len() != n {
        return Err(Error::InvalidInput("s-curve arrays differ in length".into()));
    }
    if sigma.iter().any(|s| !(*s > 0.0)) || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("s-curve errors must be positive and probabilities finite".into()));
    }
    let (pmin, pmax) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(pmin < 0.5 && pmax > 0.5) {
        return Err(Error::InvalidInput("s-curve data do not span the transition".into()));
    }
    let x: Vec<f64> = phi_z.iter().map(|&z| units::rad_to_mphi0(z)).collect();
    let guess = initial_guess(&x, p);

    let solve = |y: &[f64], start: &[f64]| -> Option<(Vec<f64>, f64)> {
        let res = |q: &[f64]| {
            let w = q[1].exp();
            Some(x.iter().zip(y).zip(sigma).map(|((xi, yi), si)| (tanh_model(*xi, q[0], w) - yi) / si).collect())
        };
        levenberg_marquardt(&res, start, 1e-7)
    };
    let (best, _) = solve(p, &guess).ok_or(Error::FitDiverged("s-curve least squares did not run".into()))?;
    let (center, width) = (best[0], best[1].exp());
    if !(width > 0.0 && width.is_finite() && center.is_finite()) {
        return Err(Error::FitDiverged(format!("s-curve width {width} is not positive")));
    }
    let rms = (x.iter().zip(p).map(|(xi, yi)| (tanh_model(*xi, center, width) - yi).powi(2)).sum::<f64>() / n as f64).sqrt();
    if rms > opts.max_rms {
        return Err(Error::FitDiverged(format!("s-curve residual {rms:.3} exceeds {}", opts.max_rms)));
    }

    let mut rng = fit::rng(opts.seed ^ 0x5c0f_e11d);
    let mut centers = Vec::with_capacity(opts.resamples);
    let mut widths = Vec::with_capacity(opts.resamples);
    for _ in 0..opts.resamples {
        let y: Vec<f64> = x
            .iter()
            .zip(sigma)
            .map(|(xi, si)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                tanh_model(*xi, center, width) + si * z
            })
            .collect();
        if let Some((q, _)) = solve(&y, &best) {
            centers.push(q[0]);
            widths.push(q[1].exp());
        }
    }
    Ok(SCurveFit {
        width_mphi0: width,
        width_err_mphi0: fit::std_dev(&widths),
        center_mphi0: center,
        center_err_mphi0: fit::std_dev(&centers),
        rms_residual: rms,
    })
}

/// `[center, ln w]` from the 12 %/50 %/88 % crossings (`tanh 1 ≈ 0.76`).
fn initial_guess(x: &[f64], p: &[f64]) -> Vec<f64> {
    let crossing = |level: f64| -> Option<f64> {
        x.windows(2).zip(p.windows(2)).find_map(|(xw, pw)| {
            let (a, b) = (pw[0] - level, pw[1] - level);
            (a <= 0.0 && b > 0.0).then(|| xw[0] + (xw[1] - xw[0]) * (-a) / (b - a))
        })
    };
    let span = x[x.len() - 1] - x[0];
    let center = crossing(0.5).unwrap_or(x[0] + 0.5 * span);
    let width = match (crossing(0.12), crossing(0.88)) {
        (Some(a), Some(b)) if b > a => 0.5 * (b - a),
        _ => span / 10.0,
    };
    vec![center, width.max(span * 1e-4).ln()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub applied_d: f64,
    pub anneal_time_ns: f64,
    pub width_mphi0: f64,
    pub width_err_mphi0: f64,
    pub center_mphi0: f64,
    pub center_err_mphi0: f64,
}

/// Corrected s-curves with the correction built from each applied `d`
/// (independent of the device value), for every anneal time.
pub fn scan_correction_parameter(
    params: &CircuitParams,
    model: Model,
    config: &SCurveConfig,
    applied_d: &[f64],
    anneal_times_ns: &[f64],
    seed: u64,
) -> Result<Vec<WidthRow>> {
    if applied_d.is_empty() || anneal_times_ns.is_empty() {
        return Err(Error::InvalidConfig("correction scan needs applied d and anneal time lists".into()));
    }
    let mut rows = Vec::new();
    for (i, &t) in anneal_times_ns.iter().enumerate() {
        for (j, &d) in applied_d.iter().enumerate() {
            let cfg = SCurveConfig { correction: true, applied_d: Some(d), anneal_time_ns: t, ..config.clone() };
            let r = run_scurve(params, model, &cfg, seed.wrapping_add((i * applied_d.len() + j) as u64))?;
            rows.push(WidthRow {
                applied_d: d,
                anneal_time_ns: t,
                width_mphi0: r.fit.width_mphi0,
                width_err_mphi0: r.fit.width_err_mphi0,
                center_mphi0: r.fit.center_mphi0,
                center_err_mphi0: r.fit.center_err_mphi0,
            });
        }
    }
    Ok(rows)
}

/// Location of the minimum of sampled `y(x)`: vertex of the parabola through
/// the smallest sample and its neighbours (the sample itself at an edge).
pub fn parabolic_minimum(x: &[f64], y: &[f64]) -> f64 {
    let k = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    if k == 0 || k + 1 >= y.len() {
        return x[k];
    }
    let (x0, x1, x2) = (x[k - 1], x[k], x[k + 1]);
    let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        return x1;
    }
    (x1 - 0.5 * num / den).clamp(x0, x2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(w: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
        let z = linspace(units::mphi0_to_rad(-10.0), units::mphi0_to_rad(10.0), 41);
        let p = z.iter().map(|&v| tanh_model(units::rad_to_mphi0(v), c, w)).collect();
        (z, p)
    }

    #[test]
    fn noiseless_round_trip() {
        let (z, p) = synthetic(2.58, 0.7);
        let f = fit_scurve_width(&z, &p, &vec![0.01; z.len()], &SCurveFitOptions { resamples: 0, ..Default::default() }).unwrap();
        assert!((f.width_mphi0 - 2.58).abs() < 1e-6, "{f:?}");
        assert!((f.center_mphi0 - 0.7).abs() < 1e-6);
    }

    #[test]
    fn binomial_round_trip() {
        let (z, p) = synthetic(1.38, -0.3);
        let (pm, s) = sample_shots(&p, 1000, 11).unwrap();
        let f = fit_scurve_width(&z, &pm, &s, &SCurveFitOptions { resamples: 200, seed: 3, ..Default::default() }).unwrap();
        assert!(f.width_err_mphi0 > 0.0);
        assert!((f.width_mphi0 - 1.38).abs() < 3.0 * f.width_err_mphi0, "{f:?}");
        assert!((f.center_mphi0 + 0.3).abs() < 3.0 * f.center_err_mphi0, "{f:?}");
    }

    #[test]
    fn mirrored_data_negate_center() {
        let (z, p) = synthetic(1.9, 1.25);
        let zf: Vec<f64> = z.iter().rev().map(|v| -v).collect();
        let pf: Vec<f64> = p.iter().rev().map(|v| 1.0 - v).collect();
        let o = SCurveFitOptions { resamples: 0, ..Default::default() };
        let a = fit_scurve_width(&z, &p, &vec![0.01; 41], &o).unwrap();
        let b = fit_scurve_width(&zf, &pf, &vec![0.01; 41], &o).unwrap();
        assert!((a.center_mphi0 + b.center_mphi0).abs() < 1e-8);
        assert!((a.width_mphi0 - b.width_mphi0).abs() < 1e-8);
    }

    #[test]
    fn fit_preconditions() {
        let (z, p) = synthetic(1.0, 0.0);
        let o = SCurveFitOptions::default();
        assert!(matches!(fit_scurve_width(&z[..4], &p[..4], &[0.1; 4], &o), Err(Error::InsufficientData { .. })));
        assert!(fit_scurve_width(&z[..10], &p[..10], &[0.1; 10], &o).is_err());
        let noise: Vec<f64> = (0..41).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        assert!(matches!(fit_scurve_width(&z, &noise, &[0.1; 41], &o), Err(Error::FitDiverged(_))));
    }

    #[test]
    fn shot_sampling_is_seeded() {
        let p = vec![0.1, 0.5, 0.9];
        assert_eq!(sample_shots(&p, 500, 7).unwrap(), sample_shots(&p, 500, 7).unwrap());
        assert_ne!(sample_shots(&p, 500, 7).unwrap().0, sample_shots(&p, 500, 8).unwrap().0);
        let (q, s) = sample_shots(&p, 0, 7).unwrap();
        assert_eq!(q, p);
        assert_eq!(s, vec![1.0; 3]);
    }

    #[test]
    fn parabola_vertex() {
        let x: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];
        let y: Vec<f64> = x.iter().map(|v| (*v - 0.11f64).powi(2) + 1.0).collect();
        assert!((parabolic_minimum(&x, &y) - 0.11).abs() < 1e-12);
        assert_eq!(parabolic_minimum(&x, &[0.0, 1.0, 2.0, 3.0, 4.0]), 0.0);
    }
}
