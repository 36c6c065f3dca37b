//! Circuit-parameter fits to ω01 (and optionally ω02) spectroscopy with the
//! asymmetry held fixed.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{self, levenberg_marquardt, nelder_mead, NelderMeadOptions};
use crate::circuit::{CircuitModel, CircuitParams, FluxPoint, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectroscopyRecord {
    pub phi_x_rad: f64,
    pub phi_z_rad: f64,
    #[serde(rename = "omega01_GHz")]
    pub omega01: f64,
    #[serde(rename = "omega02_GHz", default)]
    pub omega02: Option<f64>,
    #[serde(rename = "sigma_GHz")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectroscopyDataset {
    pub records: Vec<SpectroscopyRecord>,
}

impl SpectroscopyDataset {
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            let finite = [r.phi_x_rad, r.phi_z_rad, r.omega01, r.sigma].iter().all(|v| v.is_finite());
            if !finite || !(r.omega01 > 0.0) || !(r.sigma > 0.0) || r.omega02.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
                return Err(Error::InvalidInput(format!("spectroscopy record {i}: frequencies and σ must be positive and finite")));
            }
        }
        Ok(())
    }

    pub fn has_omega02(&self) -> bool {
        self.records.iter().any(|r| r.omega02.is_some())
    }

    /// Copy with the ω02 column removed.
    pub fn without_omega02(&self) -> Self {
        Self { records: self.records.iter().map(|r| SpectroscopyRecord { omega02: None, ..*r }).collect() }
    }

    fn residual_count(&self) -> usize {
        self.records.iter().map(|r| 1 + r.omega02.is_some() as usize).sum()
    }
}

/// Noise-free or Gaussian-noised transition frequencies of `truth` at the
/// given applied fluxes.
pub fn synthesize_spectroscopy(truth: &CircuitParams, model: Model, fluxes: &[FluxPoint], sigma_ghz: f64, include_omega02: bool, noisy: bool, seed: u64) -> Result<SpectroscopyDataset> {
    if !(sigma_ghz > 0.0) {
        return Err(Error::InvalidInput("spectroscopy σ must be positive".into()));
    }
    let cm = CircuitModel::new(truth, model)?;
    let clean: Vec<(f64, f64)> = fluxes.par_iter().map(|&f| cm.spectrum(f, 3).map(|s| (s.gap(0, 1), s.gap(0, 2)))).collect::<Result<_>>()?;
    let mut rng = fit::rng(seed);
    let mut noise = || if noisy { let z: f64 = StandardNormal.sample(&mut rng); sigma_ghz * z } else { 0.0 };
    let records = fluxes
        .iter()
        .zip(clean)
        .map(|(f, (w01, w02))| SpectroscopyRecord {
            phi_x_rad: f.phi_x,
            phi_z_rad: f.phi_z,
            omega01: w01 + noise(),
            omega02: include_omega02.then(|| w02 + noise()),
            sigma: sigma_ghz,
        })
        .collect();
    Ok(SpectroscopyDataset { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectroscopyFitOptions {
    /// Nelder–Mead starts (the initial guess plus perturbed copies).
    pub starts: usize,
    /// Relative perturbation of the extra starts.
    pub start_spread: f64,
    pub nelder_mead_evals: usize,
    pub fit_offsets: bool,
    pub resamples: usize,
    pub seed: u64,
    /// Reduced χ² above which the fit is rejected.
    pub max_reduced_chi2: f64,
}

impl Default for SpectroscopyFitOptions {
    fn default() -> Self {
        Self { starts: 3, start_spread: 0.03, nelder_mead_evals: 300, fit_offsets: true, resamples: 16, seed: 0, max_reduced_chi2: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterErrors {
    #[serde(rename = "I_z_nA")]
    pub i_z: f64,
    #[serde(rename = "C_sh_fF")]
    pub c_sh: f64,
    #[serde(rename = "C_z_fF")]
    pub c_z: Option<f64>,
    pub alpha: f64,
    #[serde(rename = "phi_x_offset_rad")]
    pub phi_x_offset: f64,
    #[serde(rename = "phi_z_offset_rad")]
    pub phi_z_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyFitResult {
    pub params: CircuitParams,
    pub model: Model,
    /// `√Σ((model − data)/σ)²`.
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub uncertainties: ParameterErrors,
    pub resamples_used: usize,
}

/// Free-parameter layout: `I_z, C_sh, [C_z], α, [δ_x, δ_z]`, scaled so each
/// coordinate is O(1).
struct Layout {
    template: CircuitParams,
    two_d: bool,
    offsets: bool,
    scale: Vec<f64>,
}

const OFFSET_SCALE: f64 = 0.01;

impl Layout {
    fn new(initial: &CircuitParams, model: Model, fixed_d: f64, offsets: bool) -> Result<Self> {
        let two_d = matches!(model, Model::TwoD { .. });
        let mut template = *initial;
        template.d = fixed_d;
        if two_d && template.c_z.is_none() {
            return Err(Error::InvalidParams("2D fit needs an initial C_z".into()));
        }
        let mut scale = vec![initial.i_z.abs(), initial.c_sh.abs()];
        if two_d {
            scale.push(template.c_z.unwrap_or(1.0).abs());
        }
        scale.push(initial.alpha.abs());
        if offsets {
            scale.extend([OFFSET_SCALE, OFFSET_SCALE]);
        }
        if scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParams("initial guess must have positive I_z, C_sh, C_z and α".into()));
        }
        Ok(Self { template, two_d, offsets, scale })
    }

    fn len(&self) -> usize {
        self.scale.len()
    }

    fn pack(&self, p: &CircuitParams) -> Vec<f64> {
        let mut v = vec![p.i_z, p.c_sh];
        if self.two_d {
            v.push(p.c_z.unwrap_or(0.0));
        }
        v.push(p.alpha);
        if self.offsets {
            v.extend([p.phi_x_offset, p.phi_z_offset]);
        }
        v.iter().zip(&self.scale).map(|(a, s)| a / s).collect()
    }

    fn unpack(&self, q: &[f64]) -> CircuitParams {
        let v: Vec<f64> = q.iter().zip(&self.scale).map(|(a, s)| a * s).collect();
        let mut p = self.template;
        p.i_z = v[0];
        p.c_sh = v[1];
        let mut k = 2;
        if self.two_d {
            p.c_z = Some(v[k]);
            k += 1;
        }
        p.alpha = v[k];
        if self.offsets {
            p.phi_x_offset = v[k + 1];
            p.phi_z_offset = v[k + 2];
        }
        p
    }
}

/// Weighted residuals, or `None` when the parameters are unphysical.
fn residuals(data: &SpectroscopyDataset, model: Model, p: &CircuitParams) -> Option<Vec<f64>> {
    p.validate(&model).ok()?;
    let cm = CircuitModel::new(p, model).ok()?;
    let per: Vec<Option<Vec<f64>>> = data
        .records
        .par_iter()
        .map(|r| {
            let levels = if r.omega02.is_some() { 3 } else { 2 };
            let s = cm.spectrum(FluxPoint::new(r.phi_x_rad, r.phi_z_rad), levels).ok()?;
            let mut out = vec![(s.gap(0, 1) - r.omega01) / r.sigma];
            if let Some(w) = r.omega02 {
                out.push((s.gap(0, 2) - w) / r.sigma);
            }
            Some(out)
        })
        .collect();
    per.into_iter().try_fold(Vec::new(), |mut acc, r| {
        acc.extend(r?);
        Some(acc)
    })
}

fn cost(r: &Option<Vec<f64>>) -> f64 {
    r.as_ref().map_or(f64::INFINITY, |v| v.iter().map(|x| x * x).sum())
}

pub fn fit_spectroscopy(data: &SpectroscopyDataset, model: Model, initial: &CircuitParams, fixed_d: f64, opts: &SpectroscopyFitOptions) -> Result<SpectroscopyFitResult> {
    data.validate()?;
    let layout = Layout::new(initial, model, fixed_d, opts.fit_offsets)?;
    let need = layout.len() + 3;
    if data.records.len() < need {
        return Err(Error::InsufficientData { have: data.records.len(), need });
    }
    let x0 = layout.pack(&layout.template);
    let mut rng = fit::rng(opts.seed);
    let mut starts = vec![x0.clone()];
    for _ in 1..opts.starts.max(1) {
        starts.push(
            x0.iter()
                .enumerate()
                .map(|(k, v)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    // offsets are perturbed absolutely, the rest relatively
                    if layout.offsets && k + 2 >= x0.len() { v + opts.start_spread * z } else { v * (1.0 + opts.start_spread * z) }
                })
                .collect(),
        );
    }
    let objective = |q: &[f64]| cost(&residuals(data, model, &layout.unpack(q)));
    let nm = NelderMeadOptions { max_evals: opts.nelder_mead_evals, ..Default::default() };
    let step: Vec<f64> = (0..x0.len()).map(|_| 0.02).collect();
    let best_start = starts
        .iter()
        .map(|s| nelder_mead(objective, s, &step, nm))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|r| r.0)
        .unwrap_or(x0);

    let solve = |d: &SpectroscopyDataset, start: &[f64]| {
        let r = |q: &[f64]| residuals(d, model, &layout.unpack(q));
        levenberg_marquardt(&r, start, 1e-6)
    };
    let (q, _) = solve(data, &best_start).ok_or_else(|| Error::FitDiverged("spectroscopy least squares did not run".into()))?;
    let params = layout.unpack(&q);
    let res = residuals(data, model, &params).ok_or_else(|| Error::FitDiverged("fitted parameters are unphysical".into()))?;
    let chi2: f64 = res.iter().map(|x| x * x).sum();
    let dof = (data.residual_count().saturating_sub(layout.len())).max(1) as f64;
    let reduced = chi2 / dof;
    if !reduced.is_finite() || reduced > opts.max_reduced_chi2 {
        return Err(Error::FitDiverged(format!("reduced χ² = {reduced:.3e}")));
    }

    // parametric resampling about the best fit
    let cm = CircuitModel::new(&params, model)?;
    let predicted: Vec<(f64, f64)> = data
        .records
        .iter()
        .map(|r| cm.spectrum(FluxPoint::new(r.phi_x_rad, r.phi_z_rad), 3).map(|s| (s.gap(0, 1), s.gap(0, 2))))
        .collect::<Result<_>>()?;
    let mut draws: Vec<CircuitParams> = Vec::new();
    for _ in 0..opts.resamples {
        let mut noise = || -> f64 { StandardNormal.sample(&mut rng) };
        let records = data
            .records
            .iter()
            .zip(&predicted)
            .map(|(r, (w1, w2))| SpectroscopyRecord {
                omega01: w1 + r.sigma * noise(),
                omega02: r.omega02.map(|_| w2 + r.sigma * noise()),
                ..*r
            })
            .collect();
        if let Some((qs, _)) = solve(&SpectroscopyDataset { records }, &q) {
            draws.push(layout.unpack(&qs));
        }
    }
    let sd = |f: &dyn Fn(&CircuitParams) -> f64| fit::std_dev(&draws.iter().map(f).collect::<Vec<_>>());
    let uncertainties = ParameterErrors {
        i_z: sd(&|p| p.i_z),
        c_sh: sd(&|p| p.c_sh),
        c_z: layout.two_d.then(|| sd(&|p| p.c_z.unwrap_or(0.0))),
        alpha: sd(&|p| p.alpha),
        phi_x_offset: sd(&|p| p.phi_x_offset),
        phi_z_offset: sd(&|p| p.phi_z_offset),
    };
    Ok(SpectroscopyFitResult { params, model, residual_norm: chi2.sqrt(), reduced_chi2: reduced, uncertainties, resamples_used: draws.len() })
}

/// Flux grid around the symmetry line: `phi_x` columns × tilts offset from
/// `φ_d` by `dz` (rad).
pub fn spectroscopy_fluxes(params: &CircuitParams, phi_x: &[f64], dz: &[f64]) -> Vec<FluxPoint> {
    phi_x
        .iter()
        .flat_map(|&x| dz.iter().map(move |&z| FluxPoint::new(x, crate::circuit::phi_d(params, x) + z)))
        .collect()
}
