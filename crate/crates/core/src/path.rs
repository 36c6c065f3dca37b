//! Anneal paths in flux space: linear ramps, Gaussian barrier pulses,
//! tilted crossing-scan paths and the nonlinear asymmetry correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erf_inv};

use crate::circuit::{self, CircuitParams, FluxPoint};
use crate::error::{Error, Result};

/// Half-width of the truncated Gaussian ramp, in units of σ.
pub const GAUSSIAN_CUT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiseShape {
    #[default]
    Linear,
    Gaussian,
}

fn default_anneal_samples() -> usize {
    1000
}

fn default_idle_samples() -> usize {
    50
}

/// Description of one anneal. Times in ns, fluxes in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub start: FluxPoint,
    pub end: FluxPoint,
    #[serde(rename = "t_f_ns")]
    pub t_f: f64,
    #[serde(default)]
    pub rise_shape: RiseShape,
    /// 5–95 % rise time of the Gaussian ramp.
    #[serde(rename = "rise_time_ns", default, skip_serializing_if = "Option::is_none")]
    pub rise_time: Option<f64>,
    /// Extra tilt added linearly in time, `amp·t/t_f`.
    #[serde(rename = "tilt_amplitude_rad", default)]
    pub tilt_amplitude: f64,
    #[serde(default)]
    pub correction: bool,
    #[serde(rename = "idle_after_ns", default)]
    pub idle_after: f64,
    #[serde(default = "default_anneal_samples")]
    pub samples_per_anneal: usize,
    #[serde(default = "default_idle_samples")]
    pub samples_per_idle: usize,
}

impl PathSpec {
    pub fn linear(start: FluxPoint, end: FluxPoint, t_f: f64) -> Self {
        Self {
            start,
            end,
            t_f,
            rise_shape: RiseShape::Linear,
            rise_time: None,
            tilt_amplitude: 0.0,
            correction: false,
            idle_after: 0.0,
            samples_per_anneal: default_anneal_samples(),
            samples_per_idle: default_idle_samples(),
        }
    }

    /// Gaussian ramp whose truncation window exactly fills the anneal.
    pub fn gaussian(start: FluxPoint, end: FluxPoint, rise_time: f64) -> Self {
        Self {
            rise_shape: RiseShape::Gaussian,
            rise_time: Some(rise_time),
            ..Self::linear(start, end, gaussian_window(rise_time))
        }
    }

    pub fn with_idle(mut self, idle: f64) -> Self {
        self.idle_after = idle;
        self
    }

    pub fn with_tilt(mut self, amp: f64) -> Self {
        self.tilt_amplitude = amp;
        self
    }

    pub fn with_correction(mut self, on: bool) -> Self {
        self.correction = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.start.phi_x, self.start.phi_z, self.end.phi_x, self.end.phi_z, self.t_f, self.tilt_amplitude, self.idle_after];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        if self.t_f <= 0.0 {
            return Err(Error::InvalidPath(format!("t_f must be positive, got {}", self.t_f)));
        }
        if self.idle_after < 0.0 {
            return Err(Error::InvalidPath(format!("idle time must be non-negative, got {}", self.idle_after)));
        }
        if self.samples_per_anneal < 1 || (self.idle_after > 0.0 && self.samples_per_idle < 1) {
            return Err(Error::InvalidPath("sample counts must be positive".into()));
        }
        if let Some(rise) = self.rise_time {
            if !(rise > 0.0 && rise <= self.t_f) {
                return Err(Error::InvalidPath(format!("rise time {rise} ns must lie in (0, t_f]")));
            }
        }
        if self.rise_shape == RiseShape::Gaussian {
            let rise = self.rise_time.ok_or_else(|| Error::InvalidPath("Gaussian ramp needs rise_time_ns".into()))?;
            let window = gaussian_window(rise);
            if window > self.t_f * (1.0 + 1e-12) {
                return Err(Error::InvalidPath(format!(
                    "Gaussian window {window:.4} ns (rise {rise} ns) does not fit in t_f = {} ns",
                    self.t_f
                )));
            }
        }
        Ok(())
    }

    /// Fraction of the start→end excursion completed at time `t`.
    pub fn ramp_fraction(&self, t: f64) -> f64 {
        if t >= self.t_f {
            return 1.0;
        }
        if t <= 0.0 {
            return 0.0;
        }
        match self.rise_shape {
            RiseShape::Linear => t / self.t_f,
            RiseShape::Gaussian => {
                let sigma = gaussian_sigma(self.rise_time.unwrap_or(self.t_f));
                let u = (t - 0.5 * self.t_f) / sigma;
                truncated_ramp(u)
            }
        }
    }

    /// Uncorrected flux at time `t` (held constant after `t_f`).
    pub fn flux_at(&self, t: f64) -> FluxPoint {
        let r = self.ramp_fraction(t);
        let tt = t.clamp(0.0, self.t_f);
        FluxPoint {
            phi_x: self.start.phi_x + (self.end.phi_x - self.start.phi_x) * r,
            phi_z: self.start.phi_z + (self.end.phi_z - self.start.phi_z) * r + self.tilt_amplitude * tt / self.t_f,
        }
    }
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn norm_quantile(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0)
}

/// Error-function ramp on `u ∈ [−2, 2]` rescaled to run exactly from 0 to 1.
fn truncated_ramp(u: f64) -> f64 {
    let u = u.clamp(-GAUSSIAN_CUT, GAUSSIAN_CUT);
    let lo = norm_cdf(-GAUSSIAN_CUT);
    let hi = norm_cdf(GAUSSIAN_CUT);
    ((norm_cdf(u) - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// σ of the truncated ramp whose 5 %→95 % traversal takes `rise_time`.
pub fn gaussian_sigma(rise_time: f64) -> f64 {
    let lo = norm_cdf(-GAUSSIAN_CUT);
    let hi = norm_cdf(GAUSSIAN_CUT);
    let u95 = norm_quantile(lo + 0.95 * (hi - lo));
    rise_time / (2.0 * u95)
}

/// Total duration `2·GAUSSIAN_CUT·σ` of the truncated ramp.
pub fn gaussian_window(rise_time: f64) -> f64 {
    2.0 * GAUSSIAN_CUT * gaussian_sigma(rise_time)
}

/// Time-sampled trajectory. `corrections` lists the asymmetry values whose
/// `φ_d(φ_x)` has been added to the tilt, in order of application.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealPath {
    pub t: Vec<f64>,
    pub phi_x: Vec<f64>,
    pub phi_z: Vec<f64>,
    pub t_f: f64,
    pub spec: Option<PathSpec>,
    pub corrections: Vec<f64>,
}

impl AnnealPath {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.t.last().unwrap_or(&0.0)
    }

    /// Build from stored samples (e.g. read from CSV). The anneal is taken
    /// to end at `t_f`; anything after it is idle.
    pub fn from_samples(t: Vec<f64>, phi_x: Vec<f64>, phi_z: Vec<f64>, t_f: f64) -> Result<Self> {
        if t.len() != phi_x.len() || t.len() != phi_z.len() || t.len() < 2 {
            return Err(Error::InvalidPath("sample columns must have equal length ≥ 2".into()));
        }
        if t[0] != 0.0 {
            return Err(Error::InvalidPath(format!("first sample at t = {} ns, expected 0", t[0])));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath("sample times must be strictly increasing".into()));
        }
        if phi_x.iter().chain(&phi_z).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite flux sample".into()));
        }
        if !(t_f > 0.0 && t_f <= t[t.len() - 1] + 1e-12) {
            return Err(Error::InvalidPath(format!("t_f = {t_f} outside sampled range")));
        }
        Ok(Self { t, phi_x, phi_z, t_f, spec: None, corrections: Vec::new() })
    }

    /// Flux at `t`: the exact profile when the path was generated from a
    /// [`PathSpec`], otherwise linear interpolation of the samples.
    pub fn flux_at(&self, t: f64) -> FluxPoint {
        match &self.spec {
            Some(spec) => {
                let mut f = spec.flux_at(t);
                f.phi_z += self.corrections.iter().map(|&d| circuit::phi_d_for(d, f.phi_x)).sum::<f64>();
                f
            }
            None => self.interpolate(t.clamp(0.0, self.end_time())),
        }
    }

    fn interpolate(&self, t: f64) -> FluxPoint {
        let k = match self.t.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(k) => return FluxPoint::new(self.phi_x[k], self.phi_z[k]),
            Err(k) => k,
        };
        let (i, j) = (k - 1, k);
        let w = (t - self.t[i]) / (self.t[j] - self.t[i]);
        FluxPoint::new(self.phi_x[i] + w * (self.phi_x[j] - self.phi_x[i]), self.phi_z[i] + w * (self.phi_z[j] - self.phi_z[i]))
    }

    /// Times at which the flux derivative may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.spec {
            Some(spec) if spec.rise_shape == RiseShape::Gaussian => {
                let half = 0.5 * gaussian_window(spec.rise_time.unwrap_or(spec.t_f));
                vec![0.5 * spec.t_f - half, 0.5 * spec.t_f + half, spec.t_f]
            }
            Some(spec) => vec![spec.t_f],
            None => self.t.clone(),
        }
    }
}

fn sample_times(spec: &PathSpec) -> Vec<f64> {
    let n = spec.samples_per_anneal;
    let mut t: Vec<f64> = (0..=n).map(|k| spec.t_f * k as f64 / n as f64).collect();
    if spec.idle_after > 0.0 {
        let m = spec.samples_per_idle;
        t.extend((1..=m).map(|k| spec.t_f + spec.idle_after * k as f64 / m as f64));
    }
    t
}

fn from_spec(spec: &PathSpec) -> Result<AnnealPath> {
    spec.validate()?;
    let t = sample_times(spec);
    let (phi_x, phi_z) = t.iter().map(|&ti| {
        let f = spec.flux_at(ti);
        (f.phi_x, f.phi_z)
    }).unzip();
    Ok(AnnealPath { t, phi_x, phi_z, t_f: spec.t_f, spec: Some(*spec), corrections: Vec::new() })
}

/// Linear ramp in both fluxes (plus the optional linear tilt), constant
/// during the idle segment. The correction flag is not applied here.
pub fn make_linear_path(spec: &PathSpec) -> Result<AnnealPath> {
    if spec.rise_shape != RiseShape::Linear {
        return Err(Error::InvalidPath("make_linear_path needs rise_shape = linear".into()));
    }
    from_spec(spec)
}

/// Truncated error-function barrier ramp centred on `t_f/2`.
pub fn make_gaussian_x_pulse(spec: &PathSpec) -> Result<AnnealPath> {
    if spec.rise_shape != RiseShape::Gaussian {
        return Err(Error::InvalidPath("make_gaussian_x_pulse needs rise_shape = gaussian".into()));
    }
    from_spec(spec)
}

/// Add `φ_d(φ_x)` to every tilt sample. Applying it twice adds `2φ_d`.
pub fn apply_asymmetry_correction(path: &AnnealPath, params: &CircuitParams) -> AnnealPath {
    apply_correction_with_d(path, params.d)
}

/// Correction computed from an assumed asymmetry `d`, independent of the
/// device value.
pub fn apply_correction_with_d(path: &AnnealPath, d: f64) -> AnnealPath {
    let mut out = path.clone();
    for (z, &x) in out.phi_z.iter_mut().zip(&path.phi_x) {
        *z += circuit::phi_d_for(d, x);
    }
    out.corrections.push(d);
    out
}

/// Build the path a spec describes, corrected with `correction_d` when the
/// spec asks for it.
pub fn build_path(spec: &PathSpec, correction_d: f64) -> Result<AnnealPath> {
    let path = match spec.rise_shape {
        RiseShape::Linear => make_linear_path(spec)?,
        RiseShape::Gaussian => make_gaussian_x_pulse(spec)?,
    };
    Ok(if spec.correction { apply_correction_with_d(&path, correction_d) } else { path })
}

/// Linear interpolation between stored samples.
pub fn sample(path: &AnnealPath, t: f64) -> Result<FluxPoint> {
    let end = path.end_time();
    if !(0.0..=end).contains(&t) {
        return Err(Error::TimeOutOfRange { t, end });
    }
    Ok(path.interpolate(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(x: f64, z: f64) -> FluxPoint {
        FluxPoint::new(x, z)
    }

    #[test]
    fn linear_midpoint_and_constant() {
        let path = make_linear_path(&PathSpec::linear(p(1.1 * PI, 0.0), p(2.0 * PI, 0.2), 20.0)).unwrap();
        let f = sample(&path, 10.0).unwrap();
        assert!((f.phi_x - 1.55 * PI).abs() < 1e-12 && (f.phi_z - 0.1).abs() < 1e-12);
        let c = make_linear_path(&PathSpec::linear(p(1.0, 0.5), p(1.0, 0.5), 5.0).with_idle(2.0)).unwrap();
        assert!(c.phi_x.iter().all(|&x| x == 1.0) && c.phi_z.iter().all(|&z| z == 0.5));
        assert_eq!(c.end_time(), 7.0);
    }

    #[test]
    fn tilt_form_is_exact() {
        let amp = 0.326 * PI;
        let spec = PathSpec::linear(p(1.1 * PI, -0.4), p(2.0 * PI, -0.4), 60.0).with_tilt(amp);
        let path = make_linear_path(&spec).unwrap();
        for (t, z) in path.t.iter().zip(&path.phi_z) {
            assert!((z - (-0.4 + amp * t / 60.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_rise_time_convention() {
        let spec = PathSpec::gaussian(p(1.1 * PI, 0.0), p(2.0 * PI, 0.0), 20.0);
        let sigma = gaussian_sigma(20.0);
        let r05 = spec.ramp_fraction(0.5 * spec.t_f - 10.0);
        let r95 = spec.ramp_fraction(0.5 * spec.t_f + 10.0);
        assert!((r05 - 0.05).abs() < 1e-9 && (r95 - 0.95).abs() < 1e-9);
        assert!((spec.ramp_fraction(0.5 * spec.t_f) - 0.5).abs() < 1e-12);
        assert!((spec.t_f - 4.0 * sigma).abs() < 1e-12);
        let path = make_gaussian_x_pulse(&spec).unwrap();
        assert!(path.phi_x.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(path.phi_x[0], 1.1 * PI);
        assert_eq!(*path.phi_x.last().unwrap(), 2.0 * PI);
    }

    #[test]
    fn gaussian_window_must_fit() {
        let mut spec = PathSpec::gaussian(p(1.1 * PI, 0.0), p(2.0 * PI, 0.0), 20.0);
        spec.t_f = 20.0;
        assert!(matches!(make_gaussian_x_pulse(&spec), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn correction_adds_phi_d() {
        let params = CircuitParams::fitted_1d();
        let path = make_linear_path(&PathSpec::linear(p(PI / 2.0, 0.0), p(2.0 * PI, 0.0), 10.0)).unwrap();
        let c = apply_asymmetry_correction(&path, &params);
        assert!((c.phi_z[0] - 0.101_649).abs() < 1e-6);
        assert!(c.phi_z.last().unwrap().abs() < 1e-12);
        let cc = apply_asymmetry_correction(&c, &params);
        assert!((cc.phi_z[0] - 2.0 * c.phi_z[0]).abs() < 1e-15);
        let ident = apply_asymmetry_correction(&path, &params.with_d(0.0));
        assert_eq!(ident.phi_z, path.phi_z);
        // exact profile agrees with the stored samples
        let f = cc.flux_at(cc.t[37]);
        assert!((f.phi_z - cc.phi_z[37]).abs() < 1e-14);
    }

    #[test]
    fn sample_bounds() {
        let path = make_linear_path(&PathSpec::linear(p(0.0, 0.0), p(1.0, 1.0), 1.0)).unwrap();
        assert!(matches!(sample(&path, 1.5), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(sample(&path, -0.1), Err(Error::TimeOutOfRange { .. })));
        assert_eq!(sample(&path, path.t[3]).unwrap().phi_x, path.phi_x[3]);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = PathSpec::gaussian(p(1.1 * PI, 0.01), p(2.0 * PI, 0.01), 20.0).with_idle(2.0).with_correction(true);
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"rise_time_ns\":20"));
        let back: PathSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
