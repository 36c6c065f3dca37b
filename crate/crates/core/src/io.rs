//! Configuration files, CSV emission, spectroscopy ingestion and run
//! manifests.
//!
//! Floats are written with 12 significant digits (`%.12g`), CSVs use a comma
//! delimiter, `.` decimals and LF line endings, and every file is written to
//! a temporary name in the target directory and renamed into place.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, FluxPoint, GapMap, Model};
use crate::error::{Error, Result};
use crate::experiments::{
    AsymmetryConfig, CrossingConfig, CrossingScanResult, SCurveConfig, SCurveResult, SpectroscopyDataset, SpectroscopyFitOptions,
    SpectroscopyRecord, WidthRow,
};
use crate::ising::ScheduleSample;
use crate::path::PathSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// `printf("%.12g")`.
pub fn fmt_g12(x: f64) -> String {
    const P: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    if (-4..P).contains(&exp) {
        trim_zeros(format!("{:.*}", (P - 1 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidInput(format!("row of {} values for {} columns", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| fmt_g12(*v))).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("CSV: {e}"))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

/// Write to a hidden temporary file next to `path`, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

pub fn gap_map_table(map: &GapMap) -> CsvTable {
    let mut t = CsvTable::new(["phi_x_rad", "phi_z_rad", "omega01_GHz"]);
    for (i, &x) in map.phi_x.iter().enumerate() {
        for (j, &z) in map.phi_z.iter().enumerate() {
            t.rows.push(vec![x, z, map.omega01[i][j]]);
        }
    }
    t
}

/// Energies (GHz) of the lowest levels at each flux point.
pub fn spectrum_slice_table(fluxes: &[FluxPoint], energies: &[Vec<f64>]) -> CsvTable {
    let k = energies.first().map_or(0, Vec::len);
    let mut t = CsvTable::new(["phi_x_rad".to_string(), "phi_z_rad".to_string()].into_iter().chain((0..k).map(|i| format!("E_{i}_GHz"))));
    for (f, e) in fluxes.iter().zip(energies) {
        t.rows.push([f.phi_x, f.phi_z].into_iter().chain(e.iter().copied()).collect());
    }
    t
}

pub fn scurve_table(r: &SCurveResult) -> CsvTable {
    let mut t = CsvTable::new(["phi_z_rad", "phi_z_mphi0", "P_right", "P_measured", "sigma"]);
    for i in 0..r.phi_z.len() {
        t.rows.push(vec![r.phi_z[i], crate::units::rad_to_mphi0(r.phi_z[i]), r.p_right[i], r.p_measured[i], r.sigma[i]]);
    }
    t
}

/// `phi_z0_rad, P_right, pop_0 … pop_{K−1}`.
pub fn crossing_table(r: &CrossingScanResult) -> CsvTable {
    let k = r.populations.first().map_or(0, Vec::len);
    let mut t = CsvTable::new(["phi_z0_rad".to_string(), "P_right".to_string()].into_iter().chain((0..k).map(|i| format!("pop_{i}"))));
    for i in 0..r.phi_z0.len() {
        t.rows.push([r.phi_z0[i], r.p_right[i]].into_iter().chain(r.populations[i].iter().copied()).collect());
    }
    t
}

pub fn catalog_table(r: &CrossingScanResult) -> CsvTable {
    let mut t = CsvTable::new(["phi_z0_rad", "s", "lower", "upper", "gap_GHz", "coupling_nA", "avoided"]);
    for c in &r.catalog {
        t.rows.push(vec![c.phi_z0_rad, c.s, c.lower as f64, c.upper as f64, c.gap_ghz, c.coupling_na, c.avoided as u8 as f64]);
    }
    t
}

pub fn width_table(rows: &[WidthRow]) -> CsvTable {
    let mut t = CsvTable::new(["applied_d", "anneal_time_ns", "width_mphi0", "width_err_mphi0", "center_mphi0", "center_err_mphi0"]);
    for r in rows {
        t.rows.push(vec![r.applied_d, r.anneal_time_ns, r.width_mphi0, r.width_err_mphi0, r.center_mphi0, r.center_err_mphi0]);
    }
    t
}

/// Points without a well-defined computational basis carry NaN; points
/// outside the two-level region keep their coefficients with `valid` = 0.
pub fn schedule_table(samples: &[ScheduleSample]) -> CsvTable {
    let mut t = CsvTable::new(["s", "phi_x_rad", "phi_z_rad", "A_GHz", "B_GHz", "alpha_I_GHz", "valid"]);
    for s in samples {
        let row = match s.coefficients {
            Some(c) => vec![s.s, c.flux.phi_x, c.flux.phi_z, c.a, c.b, c.alpha_i, c.valid as u8 as f64],
            None => vec![s.s, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0.0],
        };
        t.rows.push(row);
    }
    t
}

pub fn dataset_table(data: &SpectroscopyDataset) -> CsvTable {
    let mut t = CsvTable::new(["phi_x_rad", "phi_z_rad", "omega01_GHz", "omega02_GHz", "sigma_GHz"]);
    for r in &data.records {
        t.rows.push(vec![r.phi_x_rad, r.phi_z_rad, r.omega01, r.omega02.unwrap_or(f64::NAN), r.sigma]);
    }
    t
}

/// Read `phi_x_rad, phi_z_rad, omega01_GHz, [omega02_GHz], sigma_GHz`; an
/// empty or `nan` ω02 cell means "not measured".
pub fn read_dataset(path: &Path) -> Result<SpectroscopyDataset> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse_dataset(&bytes)
}

pub fn parse_dataset(bytes: &[u8]) -> Result<SpectroscopyDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<RawRecord>().enumerate() {
        let r = row.map_err(|e| Error::InvalidInput(format!("dataset row {}: {e}", i + 2)))?;
        records.push(SpectroscopyRecord {
            phi_x_rad: r.phi_x_rad,
            phi_z_rad: r.phi_z_rad,
            omega01: r.omega01_ghz,
            omega02: r.omega02_ghz.filter(|w| !w.is_nan()),
            sigma: r.sigma_ghz,
        });
    }
    let data = SpectroscopyDataset { records };
    data.validate()?;
    Ok(data)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    phi_x_rad: f64,
    phi_z_rad: f64,
    #[serde(rename = "omega01_GHz")]
    omega01_ghz: f64,
    #[serde(rename = "omega02_GHz", default)]
    omega02_ghz: Option<f64>,
    #[serde(rename = "sigma_GHz")]
    sigma_ghz: f64,
}

/// Gap map and spectrum slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub phi_x_range_rad: [f64; 2],
    pub phi_z_range_rad: [f64; 2],
    pub resolution: [usize; 2],
    /// Barrier biases of the energy slices along the φ_z range.
    pub slice_phi_x_rad: Vec<f64>,
    pub slice_points: usize,
    pub levels: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            phi_x_range_rad: [1.1 * PI, 2.9 * PI],
            phi_z_range_rad: [-0.1, 0.1],
            resolution: [19, 21],
            slice_phi_x_rad: vec![1.5 * PI, 2.0 * PI],
            slice_points: 41,
            levels: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdleScanConfig {
    pub idles_ns: Vec<f64>,
}

impl Default for IdleScanConfig {
    fn default() -> Self {
        Self { idles_ns: vec![0.0, 2.0, 20.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionScanConfig {
    pub applied_d: Vec<f64>,
    pub anneal_times_ns: Vec<f64>,
}

impl Default for CorrectionScanConfig {
    fn default() -> Self {
        Self { applied_d: vec![0.0, 0.05, 0.08, 0.102, 0.125, 0.15], anneal_times_ns: vec![20.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymmetryRunConfig {
    /// Device that generates the synthetic signal; the top-level parameters
    /// when absent.
    pub truth: Option<CircuitParams>,
    pub extraction: AsymmetryConfig,
}

impl Default for AsymmetryRunConfig {
    fn default() -> Self {
        Self { truth: None, extraction: AsymmetryConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpectroscopy {
    pub phi_x_rad: Vec<f64>,
    /// Tilts relative to the symmetry line `φ_d(φ_x)`.
    pub dz_rad: Vec<f64>,
    pub sigma_ghz: f64,
    pub noisy: bool,
    pub include_omega02: bool,
}

impl Default for SyntheticSpectroscopy {
    fn default() -> Self {
        Self {
            phi_x_rad: vec![1.45 * PI, 1.6 * PI, 1.75 * PI, 2.3 * PI, 2.5 * PI],
            dz_rad: vec![-0.02, -0.008, 0.015],
            sigma_ghz: 0.01,
            noisy: true,
            include_omega02: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSpectroscopyConfig {
    /// CSV dataset; synthetic data from the top-level parameters otherwise.
    pub dataset: Option<PathBuf>,
    pub synthetic: SyntheticSpectroscopy,
    /// Starting point; the top-level parameters when absent.
    pub initial: Option<CircuitParams>,
    pub fixed_d: f64,
    pub options: SpectroscopyFitOptions,
}

impl Default for FitSpectroscopyConfig {
    fn default() -> Self {
        Self { dataset: None, synthetic: SyntheticSpectroscopy::default(), initial: None, fixed_d: 0.102, options: SpectroscopyFitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleMapConfig {
    pub path: PathSpec,
}

impl Default for ScheduleMapConfig {
    fn default() -> Self {
        let mut path = PathSpec::linear(FluxPoint::new(1.1 * PI, 0.0), FluxPoint::new(2.0 * PI, 0.0), 20.0);
        path.samples_per_anneal = 200;
        Self { path }
    }
}

fn default_params() -> CircuitParams {
    CircuitParams::fitted_1d()
}

fn default_model() -> Model {
    Model::one_d()
}

/// Top-level configuration shared by all commands; each command reads its
/// own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default = "default_params")]
    pub params: CircuitParams,
    #[serde(default = "default_model")]
    pub model: Model,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub scurve: SCurveConfig,
    #[serde(default)]
    pub crossing: CrossingConfig,
    #[serde(default)]
    pub idle_scan: IdleScanConfig,
    #[serde(default)]
    pub correction_scan: CorrectionScanConfig,
    #[serde(default)]
    pub asymmetry: AsymmetryRunConfig,
    #[serde(default)]
    pub fit_spectroscopy: FitSpectroscopyConfig,
    #[serde(default)]
    pub schedule_map: ScheduleMapConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            params: default_params(),
            model: default_model(),
            seed: 0,
            spectrum: SpectrumConfig::default(),
            scurve: SCurveConfig::default(),
            crossing: CrossingConfig::default(),
            idle_scan: IdleScanConfig::default(),
            correction_scan: CorrectionScanConfig::default(),
            asymmetry: AsymmetryRunConfig::default(),
            fit_spectroscopy: FitSpectroscopyConfig::default(),
            schedule_map: ScheduleMapConfig::default(),
        }
    }
}

impl Config {
    /// Parse and check the schema version and circuit parameters. Parse
    /// errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version)));
        }
        cfg.model.validate()?;
        cfg.params.validate(&cfg.model)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// Record tying emitted files to the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: Config,
    pub seed: u64,
    pub tool_version: String,
    /// RFC 3339; not covered by the byte-identity guarantee.
    pub timestamp: String,
    pub outputs: Vec<String>,
    /// Command-specific summary (fitted widths, extracted `d`, …).
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map(|s| s + "\n").map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333333"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5e-300, "-2.5e-300"),
            (PI, "3.14159265359"),
            (0.0, "0"),
            (999999999999.5, "1e+12"),
            (f64::NAN, "nan"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g12(x), s, "{x:e}");
        }
    }

    #[test]
    fn csv_format() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push(vec![1.5, -0.25]).unwrap();
        t.push(vec![1e-7, 2.0]).unwrap();
        assert!(t.push(vec![1.0]).is_err());
        assert_eq!(String::from_utf8(t.to_bytes().unwrap()).unwrap(), "a,b\n1.5,-0.25\n1e-07,2\n");
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"abc\n").unwrap();
        write_atomic(&p, b"def\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"def\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/x.csv"), b"").is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let data = SpectroscopyDataset {
            records: vec![
                SpectroscopyRecord { phi_x_rad: 4.5, phi_z_rad: -0.01, omega01: 2.5, omega02: Some(9.75), sigma: 0.01 },
                SpectroscopyRecord { phi_x_rad: 5.0, phi_z_rad: 0.0, omega01: 0.9, omega02: None, sigma: 0.02 },
            ],
        };
        let bytes = dataset_table(&data).to_bytes().unwrap();
        assert_eq!(parse_dataset(&bytes).unwrap(), data);
        let without = b"phi_x_rad,phi_z_rad,omega01_GHz,sigma_GHz\n4.5,0,2.5,0.01\n";
        assert_eq!(parse_dataset(without).unwrap().records[0].omega02, None);
        assert!(parse_dataset(b"phi_x_rad,phi_z_rad,omega01_GHz,sigma_GHz,extra\n1,0,2,0.1,3\n").is_err());
        assert!(parse_dataset(b"phi_x_rad,phi_z_rad,omega01_GHz,sigma_GHz\n1,0,2,-0.1\n").is_err());
    }

    #[test]
    fn config_round_trip_and_rejections() {
        let cfg = Config::default();
        let text = cfg.to_json().unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), cfg);
        assert!(Config::from_json(r#"{"schema_version": 1}"#).is_ok());
        assert!(matches!(Config::from_json(r#"{"schema_version": 2}"#), Err(Error::InvalidConfig(_))));
        let typo = r#"{"schema_version": 1, "params": {"I_z_nA": 228, "C_sh_fF": 70, "alpah": 0.452, "d": 0.1}}"#;
        assert!(matches!(Config::from_json(typo), Err(Error::InvalidConfig(m)) if m.contains("alpah")));
        let broken = "{\n  \"schema_version\": 1,\n  \"seed\": \n}";
        match Config::from_json(broken) {
            Err(Error::InvalidConfig(m)) => assert!(m.contains("line 4"), "{m}"),
            other => panic!("{other:?}"),
        }
    }
}
