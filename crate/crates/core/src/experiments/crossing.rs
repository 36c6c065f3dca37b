//! Crossing scans: anneals with a tilt ramp `φ_z(t) = φ_z(0) + amp·t/t_f`
//! under the AME, scanned over `φ_z(0)`, together with the catalog of
//! avoided level crossings that explains their resonant features.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit;
use super::scan::{adaptive_scan, Refinement};
use crate::circuit::{golden_section, linspace, CircuitModel, CircuitParams, FluxPoint, Model};
use crate::dynamics::{evolve_open, Bath, BathParams, CircuitDrive, DensityMatrix, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, OperatorMatrix};
use crate::path::{make_linear_path, AnnealPath, PathSpec};
use crate::readout::{p_right, povm_right, ReadoutModel};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogConfig {
    /// Minimum gaps above this are avoided crossings, below it actual ones.
    pub gap_threshold_ghz: f64,
    /// `|⟨k|I_p|k+1⟩|` below this marks an uncoupled (actual) crossing.
    pub coupling_threshold_na: f64,
    /// Levels whose adjacent gaps are examined.
    pub levels: usize,
    /// Uniform samples before golden-section refinement of each minimum.
    pub samples: usize,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self { gap_threshold_ghz: 0.01, coupling_threshold_na: 1e-3, levels: 10, samples: 2001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossingConfig {
    pub phi_x_start_rad: f64,
    pub phi_x_end_rad: f64,
    pub t_f_ns: f64,
    pub tilt_amplitude_rad: f64,
    pub idle_ns: f64,
    pub phi_z0_min_rad: f64,
    pub phi_z0_max_rad: f64,
    pub refine: Refinement,
    pub bath: BathParams,
    pub solver: SolverConfig,
    pub readout: ReadoutModel,
    pub catalog: CatalogConfig,
    /// Features are derivative extrema beyond this many MADs.
    pub feature_mad_factor: f64,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        Self {
            phi_x_start_rad: 1.1 * PI,
            phi_x_end_rad: 2.0 * PI,
            t_f_ns: 60.0,
            tilt_amplitude_rad: 0.326 * PI,
            idle_ns: 2.0,
            phi_z0_min_rad: -0.86,
            phi_z0_max_rad: -0.60,
            refine: Refinement::default(),
            bath: BathParams::default(),
            solver: SolverConfig { rel_tol: 1e-6, abs_tol: 1e-8, output_points: 2, ..Default::default() },
            readout: ReadoutModel::default(),
            catalog: CatalogConfig::default(),
            feature_mad_factor: 3.0,
        }
    }
}

impl CrossingConfig {
    pub fn validate(&self, model: &Model) -> Result<()> {
        if !(self.phi_z0_max_rad > self.phi_z0_min_rad) {
            return Err(Error::InvalidConfig("crossing scan range is empty".into()));
        }
        if !(self.feature_mad_factor > 0.0) {
            return Err(Error::InvalidConfig("feature_mad_factor must be positive".into()));
        }
        if self.catalog.levels < 3 || self.catalog.samples < 3 {
            return Err(Error::InvalidConfig("catalog needs at least 3 levels and 3 samples".into()));
        }
        if self.catalog.levels >= model.dim() {
            return Err(Error::LevelOutOfRange { requested: self.catalog.levels + 1, dim: model.dim() });
        }
        self.bath.validate()?;
        self.readout.validate()?;
        self.refine.validate()?;
        self.solver.validate(model.dim())?;
        self.path_spec(self.phi_z0_min_rad, self.idle_ns).validate()
    }

    pub fn path_spec(&self, phi_z0: f64, idle_ns: f64) -> PathSpec {
        PathSpec::linear(FluxPoint::new(self.phi_x_start_rad, phi_z0), FluxPoint::new(self.phi_x_end_rad, phi_z0), self.t_f_ns)
            .with_tilt(self.tilt_amplitude_rad)
            .with_idle(idle_ns)
    }
}

/// A local minimum of an adjacent-level gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidedCrossing {
    /// Initial tilt of the anneal the crossing belongs to.
    pub phi_z0_rad: f64,
    /// Anneal fraction `t/t_f` at the minimum.
    pub s: f64,
    pub flux: FluxPoint,
    pub lower: usize,
    pub upper: usize,
    pub gap_ghz: f64,
    /// `|⟨lower|I_p|upper⟩|`, nA.
    pub coupling_na: f64,
    /// Gap above threshold and coupled; otherwise an actual crossing.
    pub avoided: bool,
}

/// Extremum of `dP/dφ_z(0)` beyond the noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub phi_z0_rad: f64,
    /// 1/rad
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct CrossingScanResult {
    pub idle_ns: f64,
    pub phi_z0: Vec<f64>,
    pub p_right: Vec<f64>,
    /// Final populations of the lowest `K` instantaneous levels per point.
    pub populations: Vec<Vec<f64>>,
    /// Crossings met at the end of the anneal as `φ_z(0)` varies (`s = 1`).
    pub catalog: Vec<AvoidedCrossing>,
    pub features: Vec<Feature>,
}

impl CrossingScanResult {
    pub fn max_population_error(&self) -> f64 {
        self.populations.iter().map(|p| (p.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Adjacent-gap minima of a parametrised Hamiltonian on `[lo, hi]`.
/// `system(u)` returns the Hamiltonian (GHz) and the coupling operator (nA)
/// at parameter `u`; `levels` eigenvalues are examined.
pub fn gap_minima<F>(system: F, lo: f64, hi: f64, levels: usize, samples: usize, config: &CatalogConfig) -> Result<Vec<(f64, AvoidedCrossing)>>
where
    F: Fn(f64) -> Result<(OperatorMatrix, OperatorMatrix)> + Sync,
{
    if levels < 2 || samples < 3 {
        return Err(Error::InvalidInput("gap search needs at least 2 levels and 3 samples".into()));
    }
    let us = linspace(lo, hi, samples);
    let energies: Vec<Vec<f64>> = us.par_iter().map(|&u| linalg::eigensolve(&system(u)?.0, levels).map(|s| s.eigenvalues)).collect::<Result<_>>()?;
    let gap_at = |u: f64, k: usize| -> Result<f64> { Ok(linalg::eigensolve(&system(u)?.0, levels)?.gap(k, k + 1)) };
    let mut out = Vec::new();
    for k in 0..levels - 1 {
        let g = |i: usize| energies[i][k + 1] - energies[i][k];
        for i in 1..samples - 1 {
            if g(i) < g(i - 1) && g(i) <= g(i + 1) {
                let u = golden_section(|u| gap_at(u, k), us[i - 1], us[i + 1], 1e-10 * (1.0 + (hi - lo).abs()))?;
                let (h, ip) = system(u)?;
                let spec = linalg::eigensolve(&h, levels)?;
                let coupling = spec.matrix_elements(&ip)?[(k, k + 1)].norm();
                let gap = spec.gap(k, k + 1);
                let avoided = gap > config.gap_threshold_ghz && coupling > config.coupling_threshold_na;
                let c = AvoidedCrossing {
                    phi_z0_rad: f64::NAN,
                    s: f64::NAN,
                    flux: FluxPoint::new(f64::NAN, f64::NAN),
                    lower: k,
                    upper: k + 1,
                    gap_ghz: gap,
                    coupling_na: coupling,
                    avoided,
                };
                out.push((u, c));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.lower.cmp(&b.1.lower)));
    Ok(out)
}

/// Gap minima between adjacent levels among the lowest `levels` along the
/// anneal part of `path`.
pub fn locate_avoided_crossings(params: &CircuitParams, model: Model, path: &AnnealPath, levels: usize, config: &CatalogConfig) -> Result<Vec<AvoidedCrossing>> {
    if levels < 3 {
        return Err(Error::InvalidInput(format!("crossing search needs K ≥ 3, got {levels}")));
    }
    let cm = CircuitModel::new(params, model)?;
    let t_f = path.t_f;
    let system = |s: f64| {
        let f = path.flux_at(s * t_f);
        Ok((cm.hamiltonian(f), cm.persistent_current(f)))
    };
    let phi_z0 = path.phi_z.first().copied().unwrap_or(f64::NAN);
    Ok(gap_minima(system, 0.0, 1.0, levels, config.samples, config)?
        .into_iter()
        .map(|(s, c)| AvoidedCrossing { phi_z0_rad: phi_z0, s, flux: path.flux_at(s * t_f), ..c })
        .collect())
}

/// Crossings at the end of the anneal (`s = 1`) as a function of `φ_z(0)`
/// over `[lo, hi]`.
pub fn end_of_anneal_catalog(params: &CircuitParams, model: Model, config: &CrossingConfig, lo: f64, hi: f64) -> Result<Vec<AvoidedCrossing>> {
    let cm = CircuitModel::new(params, model)?;
    let end = |z0: f64| FluxPoint::new(config.phi_x_end_rad, z0 + config.tilt_amplitude_rad);
    let system = |z0: f64| Ok((cm.hamiltonian(end(z0)), cm.persistent_current(end(z0))));
    Ok(gap_minima(system, lo, hi, config.catalog.levels, config.catalog.samples, &config.catalog)?
        .into_iter()
        .map(|(z0, c)| AvoidedCrossing { phi_z0_rad: z0, s: 1.0, flux: end(z0), ..c })
        .collect())
}

struct PointOutcome {
    /// `(P_right, populations)` per idle time.
    per_idle: Vec<(f64, Vec<f64>)>,
}

fn readout(state: &DensityMatrix, ip: &OperatorMatrix, model: &ReadoutModel) -> Result<(f64, Vec<f64>)> {
    Ok((p_right(state, &povm_right(ip, model)?)?.clamp(0.0, 1.0), state.populations()))
}

/// One anneal with the longest idle; shorter idles are read from snapshots
/// (the flux is constant after `t_f`, so the trajectories coincide).
fn crossing_point(params: &CircuitParams, model: Model, config: &CrossingConfig, bath: &Bath, idles: &[f64], phi_z0: f64) -> Result<PointOutcome> {
    let longest = idles.iter().copied().fold(0.0, f64::max);
    let path = make_linear_path(&config.path_spec(phi_z0, longest))?;
    let drive = CircuitDrive::new(params, &path, model)?;
    let end = path.end_time();
    let snaps: Vec<f64> = idles.iter().map(|i| config.t_f_ns + i).filter(|&t| t < end).collect();
    let solver = SolverConfig { snapshot_times: snaps, ..config.solver.clone() };
    let r = evolve_open(&drive, bath, &solver)?;
    let per_idle = idles
        .iter()
        .map(|&idle| {
            let t = config.t_f_ns + idle;
            if t >= end {
                return readout(&r.final_state, &r.final_ip, &config.readout);
            }
            let s = r
                .snapshots
                .iter()
                .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
                .ok_or_else(|| Error::InvalidConfig(format!("no snapshot at t = {t} ns")))?;
            readout(&s.state, &s.ip, &config.readout)
        })
        .collect::<Result<_>>()?;
    Ok(PointOutcome { per_idle })
}

/// One crossing scan per idle time, sharing the anneal of each `φ_z(0)`.
pub fn scan_idle_times(params: &CircuitParams, model: Model, config: &CrossingConfig, idles_ns: &[f64]) -> Result<Vec<CrossingScanResult>> {
    params.validate(&model)?;
    config.validate(&model)?;
    if idles_ns.is_empty() || idles_ns.iter().any(|i| !(*i >= 0.0 && i.is_finite())) {
        return Err(Error::InvalidConfig("idle times must be a non-empty list of non-negative values".into()));
    }
    let bath = Bath::new(&config.bath)?;
    let points = adaptive_scan(
        |z| crossing_point(params, model, config, &bath, idles_ns, z),
        |o: &PointOutcome| o.per_idle.iter().map(|(p, _)| *p).collect(),
        config.phi_z0_min_rad,
        config.phi_z0_max_rad,
        &config.refine,
    )?;
    let margin = units::mphi0_to_rad(1.0);
    let catalog = end_of_anneal_catalog(params, model, config, config.phi_z0_min_rad - margin, config.phi_z0_max_rad + margin)?;
    let phi_z0: Vec<f64> = points.iter().map(|p| p.0).collect();
    Ok(idles_ns
        .iter()
        .enumerate()
        .map(|(k, &idle)| {
            let p_right: Vec<f64> = points.iter().map(|p| p.1.per_idle[k].0).collect();
            let populations = points.iter().map(|p| p.1.per_idle[k].1.clone()).collect();
            let features = detect_features(&phi_z0, &p_right, config.feature_mad_factor);
            CrossingScanResult { idle_ns: idle, phi_z0: phi_z0.clone(), p_right, populations, catalog: catalog.clone(), features }
        })
        .collect())
}

pub fn run_crossing_scan(params: &CircuitParams, model: Model, config: &CrossingConfig) -> Result<CrossingScanResult> {
    Ok(scan_idle_times(params, model, config, &[config.idle_ns])?.remove(0))
}

/// Local extrema of the finite-difference derivative whose distance from
/// the median derivative exceeds `factor` median absolute deviations.
/// Positions are interval midpoints.
pub fn detect_features(x: &[f64], p: &[f64], factor: f64) -> Vec<Feature> {
    if x.len() < 3 {
        return Vec::new();
    }
    let mid: Vec<f64> = x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let slope: Vec<f64> = x.windows(2).zip(p.windows(2)).map(|(xw, pw)| (pw[1] - pw[0]) / (xw[1] - xw[0])).collect();
    let med = fit::median(&slope);
    let dev: Vec<f64> = slope.iter().map(|s| (s - med).abs()).collect();
    // round-off guard for noise-free curves whose MAD vanishes
    let floor = (factor * fit::mad(&slope)).max(1e-9 * dev.iter().copied().fold(0.0, f64::max));
    (0..slope.len())
        .filter(|&i| {
            let left = if i > 0 { dev[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < dev.len() { dev[i + 1] } else { f64::NEG_INFINITY };
            dev[i] > floor && dev[i] >= left && dev[i] > right
        })
        .map(|i| Feature { phi_z0_rad: mid[i], slope: slope[i] })
        .collect()
}

/// Largest `P_i − P_j` with `i < j` (a fall after a rise) among samples
/// within `half_width` of `center`; 0 for a monotone rise.
pub fn max_drop(x: &[f64], p: &[f64], center: f64, half_width: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut running = f64::NEG_INFINITY;
    for (xi, pi) in x.iter().zip(p) {
        if (xi - center).abs() <= half_width {
            running = running.max(*pi);
            best = best.max(running - pi);
        }
    }
    best
}

/// Distance (rad) from `phi_z0` to the closest avoided crossing.
pub fn distance_to_catalog(catalog: &[AvoidedCrossing], phi_z0: f64) -> Option<f64> {
    catalog.iter().filter(|c| c.avoided).map(|c| (c.phi_z0_rad - phi_z0).abs()).min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DrivenSystem, TwoLevelSweep};
    use crate::linalg::Basis;

    #[test]
    fn two_level_single_crossing() {
        let sweep = TwoLevelSweep::new(0.04, -1.0, 1.5, 10.0).unwrap();
        let system = |t: f64| {
            let h = OperatorMatrix::new(Basis::Generic { dim: 2 }, sweep.dense(&sweep.h_coefficients(t)))?;
            let c = OperatorMatrix::new(Basis::Generic { dim: 2 }, sweep.dense(&sweep.coupling_coefficients(t)))?;
            Ok((h, c))
        };
        let found = gap_minima(system, 0.0, 10.0, 2, 101, &CatalogConfig::default()).unwrap();
        assert_eq!(found.len(), 1);
        let (t, c) = found[0];
        assert!((sweep.b_at(t)).abs() < 1e-7, "B = {}", sweep.b_at(t));
        assert!((c.gap_ghz - 0.08).abs() < 1e-12);
        assert!(c.avoided);
    }

    #[test]
    fn features_at_steps_only() {
        let x = linspace(-1.0, 1.0, 201);
        let p: Vec<f64> = x.iter().map(|&v| 0.2 * v + 0.5 + if v > 0.305 { 0.1 } else { 0.0 }).collect();
        let f = detect_features(&x, &p, 3.0);
        assert_eq!(f.len(), 1);
        assert!((f[0].phi_z0_rad - 0.305).abs() < 0.01);
    }

    #[test]
    fn drop_metric() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(max_drop(&x, &[0.1, 0.2, 0.3, 0.4, 0.5], 2.0, 5.0), 0.0);
        assert!((max_drop(&x, &[0.1, 0.9, 0.3, 0.4, 0.5], 2.0, 5.0) - 0.6).abs() < 1e-15);
        assert_eq!(max_drop(&x, &[0.1, 0.9, 0.3, 0.4, 0.5], 3.5, 0.6), 0.0);
    }
}
