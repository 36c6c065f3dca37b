//! Virtual calibration experiments: s-curves and their widths, asymmetry
//! extraction, spectroscopy fits, crossing scans, idle-time and correction
//! sweeps, Gaussian broadening and effective temperatures.

mod asymmetry;
mod broaden;
mod crossing;
pub mod fit;
mod scan;
mod scurve;
mod spectroscopy;

pub use asymmetry::{extract_asymmetry, fit_gaussian, synthesize_asymmetry_signal, AsymmetryConfig, AsymmetryFitResult, SignalColumn, SymmetryPoint};
pub use broaden::{gaussian_broaden, interpolate};
pub use crossing::{
    detect_features, distance_to_catalog, end_of_anneal_catalog, gap_minima, locate_avoided_crossings, max_drop,
    run_crossing_scan, scan_idle_times, AvoidedCrossing, CatalogConfig, CrossingConfig, CrossingScanResult, Feature,
};
pub use scan::{adaptive_scan, Refinement};
pub use scurve::{
    fit_scurve_width, parabolic_minimum, run_scurve, sample_shots, scan_correction_parameter, scurve_point, tanh_model,
    SCurveConfig, SCurveFit, SCurveFitOptions, SCurveResult, WidthRow,
};
pub use spectroscopy::{
    fit_spectroscopy, spectroscopy_fluxes, synthesize_spectroscopy, ParameterErrors, SpectroscopyDataset, SpectroscopyFitOptions,
    SpectroscopyFitResult, SpectroscopyRecord,
};

use crate::units;

/// `T_eff = w·I_p/k_B` in mK for a width in μΦ0 and a current in μA.
pub fn effective_temperature(width_uphi0: f64, current_ua: f64) -> f64 {
    units::effective_temperature_mk(width_uphi0, current_ua)
}
