//! `csfq` — command-line driver: gap maps, virtual calibration experiments
//! and run manifests.

mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use csfq_core::io::{self, Config, RunManifest, SCHEMA_VERSION};
use csfq_core::{CircuitParams, Error, Model};

use commands::Outputs;

#[derive(Parser, Debug)]
#[command(name = "csfq", version, about = "Multilevel CSFQ annealing simulation and calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration (defaults when absent).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for scan points.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Retained eigenlevels K.
    #[arg(long, global = true)]
    levels: Option<usize>,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
    /// Disable the Lamb-shift term of the master equation.
    #[arg(long, global = true)]
    no_lamb_shift: bool,
    /// Asymmetry correction; `run scurve` produces both curves when absent.
    #[arg(long, global = true, value_enum)]
    correction: Option<Switch>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// ω01 gap map and energy slices.
    Spectrum,
    /// One calibration experiment.
    Run {
        #[arg(value_enum)]
        experiment: Experiment,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Scurve,
    Crossing,
    Asymmetry,
    FitSpectroscopy,
    ScheduleMap,
    IdleScan,
    CorrectionScan,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Scurve => "scurve",
            Experiment::Crossing => "crossing",
            Experiment::Asymmetry => "asymmetry",
            Experiment::FitSpectroscopy => "fit-spectroscopy",
            Experiment::ScheduleMap => "schedule-map",
            Experiment::IdleScan => "idle-scan",
            Experiment::CorrectionScan => "correction-scan",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Switch {
    On,
    Off,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { 3 } else { 2 };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("csfq: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure { code: 2, message: "--workers must be positive".into() });
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure { code: 1, message: e.to_string() })?;
    }
    let (command, outputs) = match cli.command {
        Command::Spectrum => ("spectrum".to_string(), commands::spectrum(&cfg)),
        Command::Run { experiment } => {
            let correction = cli.correction.map(|c| c == Switch::On);
            let ctx = |e: Error| match e {
                Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", experiment.name())),
                Error::FitDiverged(m) => Error::FitDiverged(format!("{}: {m}", experiment.name())),
                other => other,
            };
            (format!("run {}", experiment.name()), commands::run(experiment, &cfg, correction, cli.config.as_deref()).map_err(ctx))
        }
    };
    let outputs = outputs?;
    write_outputs(&cli.out, &command, &cfg, outputs)
}

/// Load the configuration and apply the command-line overrides.
fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(m) = cli.model {
        cfg.model = match m {
            ModelArg::OneD => Model::one_d(),
            ModelArg::TwoD => Model::two_d(),
        };
        if cli.config.is_none() {
            cfg.params = match m {
                ModelArg::OneD => CircuitParams::fitted_1d(),
                ModelArg::TwoD => CircuitParams::fitted_2d(),
            };
        }
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(k) = cli.levels {
        cfg.spectrum.levels = k;
        cfg.scurve.solver.levels = k;
        cfg.crossing.solver.levels = k;
        cfg.crossing.catalog.levels = k;
    }
    if cli.no_lamb_shift {
        cfg.crossing.bath.lamb_shift = false;
        if let Some(b) = cfg.scurve.bath.as_mut() {
            b.lamb_shift = false;
        }
    }
    if let Some(c) = cli.correction {
        cfg.scurve.correction = c == Switch::On;
    }
    cfg.model.validate()?;
    cfg.params.validate(&cfg.model)?;
    Ok(cfg)
}

fn timestamp() -> String {
    use time::format_description::well_known::Rfc3339;
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| time::OffsetDateTime::from_unix_timestamp(s).ok())
        .unwrap_or_else(time::OffsetDateTime::now_utc);
    t.format(&Rfc3339).unwrap_or_default()
}

/// Write every file of a finished run plus its manifest; on any failure the
/// files already written are removed again.
fn write_outputs(dir: &Path, command: &str, cfg: &Config, outputs: Outputs) -> Result<(), Failure> {
    let io_failure = |m: String| Failure { code: 1, message: m };
    fs::create_dir_all(dir).map_err(|e| io_failure(format!("{}: {e}", dir.display())))?;
    let mut names: Vec<String> = outputs.files.iter().map(|(n, _)| n.clone()).collect();
    names.push("manifest.json".into());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: timestamp(),
        outputs: names,
        results: outputs.results,
    };
    let mut written = Vec::new();
    let result = (|| {
        for (name, table) in &outputs.files {
            let path = dir.join(name);
            table.write(&path)?;
            written.push(path);
        }
        let path = dir.join("manifest.json");
        io::write_atomic(&path, manifest.to_json()?.as_bytes())?;
        written.push(path);
        Ok::<(), Error>(())
    })();
    if let Err(e) = result {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        return Err(io_failure(e.to_string()));
    }
    Ok(())
}
