//! Experiment execution; every command computes all of its results before
//! anything is written.

use std::path::Path;

use csfq_core::circuit::{gap_map, linspace, CircuitModel, FluxPoint};
use csfq_core::experiments::{
    extract_asymmetry, fit_spectroscopy, parabolic_minimum, run_crossing_scan, run_scurve, scan_correction_parameter, scan_idle_times,
    spectroscopy_fluxes, synthesize_asymmetry_signal, synthesize_spectroscopy, CrossingScanResult, SCurveConfig, SignalColumn,
};
use csfq_core::io::{self, Config, CsvTable};
use csfq_core::ising::schedule_along_path;
use csfq_core::path::build_path;
use csfq_core::{Error, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::Experiment;

pub struct Outputs {
    pub files: Vec<(String, CsvTable)>,
    pub results: Value,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn spectrum(cfg: &Config) -> Result<Outputs> {
    let s = &cfg.spectrum;
    if s.levels < 2 {
        return Err(Error::InvalidConfig("spectrum.levels must be at least 2".into()));
    }
    let map = gap_map(
        &cfg.params,
        cfg.model,
        (s.phi_x_range_rad[0], s.phi_x_range_rad[1]),
        (s.phi_z_range_rad[0], s.phi_z_range_rad[1]),
        (s.resolution[0], s.resolution[1]),
    )?;
    let cm = CircuitModel::new(&cfg.params, cfg.model)?;
    let fluxes: Vec<FluxPoint> = s
        .slice_phi_x_rad
        .iter()
        .flat_map(|&x| linspace(s.phi_z_range_rad[0], s.phi_z_range_rad[1], s.slice_points).into_iter().map(move |z| FluxPoint::new(x, z)))
        .collect();
    let energies: Vec<Vec<f64>> = fluxes.par_iter().map(|&f| cm.spectrum(f, s.levels).map(|sp| sp.eigenvalues)).collect::<Result<_>>()?;
    let min_gap = map.omega01.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(Outputs {
        files: vec![("gap_map.csv".into(), io::gap_map_table(&map)), ("spectrum_slices.csv".into(), io::spectrum_slice_table(&fluxes, &energies))],
        results: json!({ "min_omega01_GHz": min_gap, "points": map.phi_x.len() * map.phi_z.len() }),
    })
}

pub fn run(experiment: Experiment, cfg: &Config, correction: Option<bool>, config_path: Option<&Path>) -> Result<Outputs> {
    match experiment {
        Experiment::Scurve => scurve(cfg, correction),
        Experiment::Crossing => crossing(cfg),
        Experiment::IdleScan => idle_scan(cfg),
        Experiment::CorrectionScan => correction_scan(cfg),
        Experiment::Asymmetry => asymmetry(cfg),
        Experiment::FitSpectroscopy => fit(cfg, config_path),
        Experiment::ScheduleMap => schedule_map(cfg),
    }
}

fn scurve(cfg: &Config, correction: Option<bool>) -> Result<Outputs> {
    let modes = match correction {
        Some(c) => vec![c],
        None => vec![false, true],
    };
    let mut files = Vec::new();
    let mut results = serde_json::Map::new();
    for on in modes {
        let sc = SCurveConfig { correction: on, ..cfg.scurve.clone() };
        sc.validate(&cfg.model)?;
        let r = run_scurve(&cfg.params, cfg.model, &sc, cfg.seed)?;
        let label = if on { "corrected" } else { "uncorrected" };
        files.push((format!("scurve_{label}.csv"), io::scurve_table(&r)));
        results.insert(label.into(), json!({ "applied_d": r.applied_d, "fit": to_value(&r.fit) }));
    }
    Ok(Outputs { files, results: Value::Object(results) })
}

fn crossing_summary(r: &CrossingScanResult) -> Value {
    json!({
        "idle_ns": r.idle_ns,
        "points": r.phi_z0.len(),
        "max_population_error": r.max_population_error(),
        "features": to_value(&r.features),
        "avoided_crossings": r.catalog.iter().filter(|c| c.avoided).count(),
    })
}

fn crossing(cfg: &Config) -> Result<Outputs> {
    cfg.crossing.validate(&cfg.model)?;
    let r = run_crossing_scan(&cfg.params, cfg.model, &cfg.crossing)?;
    Ok(Outputs {
        files: vec![("crossing.csv".into(), io::crossing_table(&r)), ("crossing_catalog.csv".into(), io::catalog_table(&r))],
        results: crossing_summary(&r),
    })
}

fn idle_scan(cfg: &Config) -> Result<Outputs> {
    cfg.crossing.validate(&cfg.model)?;
    let idles = &cfg.idle_scan.idles_ns;
    if idles.is_empty() || idles.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidConfig("idle_scan.idles_ns must be a non-empty list of non-negative times".into()));
    }
    let runs = scan_idle_times(&cfg.params, cfg.model, &cfg.crossing, idles)?;
    let mut files = Vec::new();
    for r in &runs {
        files.push((format!("crossing_idle_{}ns.csv", io::fmt_g12(r.idle_ns)), io::crossing_table(r)));
    }
    if let Some(r) = runs.first() {
        files.push(("crossing_catalog.csv".into(), io::catalog_table(r)));
    }
    Ok(Outputs { files, results: Value::Array(runs.iter().map(crossing_summary).collect()) })
}

fn correction_scan(cfg: &Config) -> Result<Outputs> {
    cfg.scurve.validate(&cfg.model)?;
    let cs = &cfg.correction_scan;
    let rows = scan_correction_parameter(&cfg.params, cfg.model, &cfg.scurve, &cs.applied_d, &cs.anneal_times_ns, cfg.seed)?;
    let minima: Vec<Value> = cs
        .anneal_times_ns
        .iter()
        .map(|&t| {
            let sel: Vec<_> = rows.iter().filter(|r| r.anneal_time_ns == t).collect();
            let x: Vec<f64> = sel.iter().map(|r| r.applied_d).collect();
            let y: Vec<f64> = sel.iter().map(|r| r.width_mphi0).collect();
            json!({ "anneal_time_ns": t, "width_minimum_d": parabolic_minimum(&x, &y) })
        })
        .collect();
    Ok(Outputs { files: vec![("correction_scan.csv".into(), io::width_table(&rows))], results: json!({ "minima": minima }) })
}

fn signal_table(columns: &[SignalColumn]) -> CsvTable {
    let mut t = CsvTable::new(["phi_x_rad", "phi_z_rad", "signal"]);
    for c in columns {
        for (z, s) in c.phi_z_rad.iter().zip(&c.signal) {
            t.rows.push(vec![c.phi_x_rad, *z, *s]);
        }
    }
    t
}

fn asymmetry(cfg: &Config) -> Result<Outputs> {
    let a = &cfg.asymmetry;
    let truth = a.truth.unwrap_or(cfg.params);
    truth.validate(&cfg.model)?;
    let columns = synthesize_asymmetry_signal(&truth, cfg.model, &a.extraction, cfg.seed)?;
    let fit = extract_asymmetry(&columns, &a.extraction)?;
    let mut points = CsvTable::new(["phi_x_rad", "center_rad", "center_err_rad"]);
    for p in &fit.points {
        points.rows.push(vec![p.phi_x_rad, p.center_rad, p.center_err_rad]);
    }
    Ok(Outputs {
        files: vec![("asymmetry_signal.csv".into(), signal_table(&columns)), ("asymmetry_points.csv".into(), points)],
        results: to_value(&fit),
    })
}

fn fit(cfg: &Config, config_path: Option<&Path>) -> Result<Outputs> {
    let f = &cfg.fit_spectroscopy;
    let data = match &f.dataset {
        Some(p) => {
            let base = config_path.and_then(Path::parent).unwrap_or(Path::new(""));
            io::read_dataset(&base.join(p))?
        }
        None => {
            let s = &f.synthetic;
            let fluxes = spectroscopy_fluxes(&cfg.params, &s.phi_x_rad, &s.dz_rad);
            synthesize_spectroscopy(&cfg.params, cfg.model, &fluxes, s.sigma_ghz, s.include_omega02, s.noisy, cfg.seed)?
        }
    };
    let initial = f.initial.unwrap_or(cfg.params);
    let opts = csfq_core::experiments::SpectroscopyFitOptions { seed: cfg.seed, ..f.options };
    let r = fit_spectroscopy(&data, cfg.model, &initial, f.fixed_d, &opts)?;
    Ok(Outputs { files: vec![("spectroscopy_data.csv".into(), io::dataset_table(&data))], results: to_value(&r) })
}

fn schedule_map(cfg: &Config) -> Result<Outputs> {
    let spec = &cfg.schedule_map.path;
    spec.validate()?;
    let path = build_path(spec, cfg.params.d)?;
    let samples = schedule_along_path(&cfg.params, &path, cfg.model)?;
    let valid = samples.iter().filter(|s| s.is_valid()).count();
    Ok(Outputs { files: vec![("schedule.csv".into(), io::schedule_table(&samples))], results: json!({ "samples": samples.len(), "valid": valid }) })
}
