//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use csfq_core::circuit::{linspace, min_gap_phi_z, phi_d, CircuitModel};
use csfq_core::dynamics::{evolve_ame, evolve_closed, evolve_schrodinger, gamma, BathParams, DensityMatrix, SolverConfig, TwoLevelSweep};
use csfq_core::experiments::{
    distance_to_catalog, effective_temperature, extract_asymmetry, fit_spectroscopy, max_drop, parabolic_minimum, run_scurve,
    scan_correction_parameter, scan_idle_times, spectroscopy_fluxes, synthesize_asymmetry_signal, synthesize_spectroscopy,
    AsymmetryConfig, CrossingConfig, Refinement, SCurveConfig, SpectroscopyFitOptions,
};
use csfq_core::io::{self, CsvTable};
use csfq_core::ising::ising_coefficients;
use csfq_core::path::{make_linear_path, PathSpec};
use csfq_core::units::{self, josephson_energy_ghz};
use csfq_core::{CircuitParams, FluxPoint, Model, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn c1_effective_temperature() -> Result<Outcome> {
    let rows = [(45.0, 2.6, 17.5), (100.0, 0.87, 13.0), (1400.0, 0.17, 35.7), (760.0, 0.17, 19.4)];
    let mut worst: f64 = 0.0;
    let mut vals = Vec::new();
    for (w, i, t) in rows {
        let v = effective_temperature(w, i);
        worst = worst.max((v - t).abs());
        vals.push(format!("{v:.2}"));
    }
    outcome(worst <= 0.5, format!("T_eff = [{}] mK, max deviation {worst:.3} mK", vals.join(", ")))
}

fn c2_energy_scale() -> Result<Outcome> {
    let e = josephson_energy_ghz(CircuitParams::fitted_1d().i_z);
    outcome((e - 113.0).abs() <= 1.0, format!("I_zΦ0/(2πh) = {e:.3} GHz"))
}

fn c3_minimum_gap_law() -> Result<Outcome> {
    let p = CircuitParams::fitted_1d();
    let cm = CircuitModel::new(&p, Model::one_d())?;
    // |φ_d| reaches 0.4 rad at the ends of the φx range
    let zs = linspace(-1.0, 1.0, 401);
    let mut worst: f64 = 0.0;
    for x in linspace(1.15 * PI, 2.85 * PI, 10) {
        // coarse scan, then local refinement of the bracketing cells
        let w: Vec<f64> = zs.iter().map(|&z| cm.spectrum(FluxPoint::new(x, z), 2).map(|s| s.gap(0, 1))).collect::<Result<_>>()?;
        let k = (0..w.len()).min_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
        let (lo, hi) = (zs[k.saturating_sub(1)], zs[(k + 1).min(zs.len() - 1)]);
        let z = min_gap_phi_z(&cm, x, lo, hi, 1e-10)?;
        worst = worst.max((z - phi_d(&p, x)).abs());
    }
    outcome(worst < 1e-3, format!("max |argmin − φ_d| = {worst:.2e} rad over 10 columns"))
}

fn c4_asymmetry_round_trip() -> Result<Outcome> {
    let truth = CircuitParams::fitted_1d().with_offsets(units::mphi0_to_rad(2.0), units::mphi0_to_rad(-3.0));
    let cfg = AsymmetryConfig::default();
    let mut worst: f64 = 0.0;
    let mut ds = Vec::new();
    for seed in 0..20 {
        let cols = synthesize_asymmetry_signal(&truth, Model::one_d(), &cfg, seed)?;
        let fit = extract_asymmetry(&cols, &cfg)?;
        worst = worst.max((fit.d - truth.d).abs());
        ds.push(fit.d);
    }
    let (lo, hi) = ds.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &d| (a.0.min(d), a.1.max(d)));
    outcome(worst <= 0.005, format!("20 realisations: d ∈ [{lo:.4}, {hi:.4}], max |d − 0.102| = {worst:.4}"))
}

fn c5_spectroscopy_round_trip() -> Result<Outcome> {
    let phi_x = [1.45 * PI, 1.6 * PI, 1.75 * PI, 2.3 * PI, 2.5 * PI];
    let dz = [-0.02, -0.008, 0.015];
    let sweep_dz: Vec<f64> = [0.005, 0.01, 0.015, 0.02, 0.03, 0.04].iter().flat_map(|v| [-v, *v]).collect();
    // reduced 2D truncation keeps the fits fast; the same model generates
    // and fits the data
    let cases = [(CircuitParams::fitted_1d(), Model::one_d(), true), (CircuitParams::fitted_2d(), Model::TwoD { n0: 5, n1: 16 }, false)];
    let mut details = Vec::new();
    let mut pass = true;
    for (truth, model, offsets) in cases {
        let fluxes = spectroscopy_fluxes(&truth, &phi_x, &dz);
        let sweep = spectroscopy_fluxes(&truth, &linspace(1.1 * PI, 1.9 * PI, 33), &sweep_dz);
        let start = CircuitParams {
            i_z: truth.i_z * 1.03,
            c_sh: truth.c_sh * 0.97,
            c_z: truth.c_z.map(|c| c * 1.03),
            alpha: truth.alpha * 1.02,
            ..truth
        };
        let opts = SpectroscopyFitOptions { fit_offsets: offsets, resamples: 0, ..Default::default() };
        let label = if truth.c_z.is_some() { "2D" } else { "1D" };

        let clean = synthesize_spectroscopy(&truth, model, &fluxes, 0.01, true, false, 1)?;
        let fit = fit_spectroscopy(&clean, model, &start, truth.d, &opts)?;
        let rel = |a: f64, b: f64| (a / b - 1.0).abs();
        let mut worst = rel(fit.params.i_z, truth.i_z).max(rel(fit.params.c_sh, truth.c_sh)).max(rel(fit.params.alpha, truth.alpha));
        if let (Some(a), Some(b)) = (fit.params.c_z, truth.c_z) {
            worst = worst.max(rel(a, b));
        }
        pass &= worst <= 0.005;
        details.push(format!("{label} noiseless max rel err {worst:.1e}"));

        // 10 MHz noise: the table uncertainties reflect dense φ_z sweeps, so
        // the noisy case uses one; C_z is the weakest-constrained parameter
        // and needs ~400 records to reach its table precision
        let noisy = synthesize_spectroscopy(&truth, model, &sweep, 0.01, true, true, 2)?;
        let lm_only = SpectroscopyFitOptions { starts: 1, nelder_mead_evals: 0, ..opts };
        let fit = fit_spectroscopy(&noisy, model, &start, truth.d, &lm_only)?;
        let mut ratios = vec![
            (fit.params.i_z - truth.i_z).abs() / 3.0,
            (fit.params.c_sh - truth.c_sh).abs() / 1.0,
            (fit.params.alpha - truth.alpha).abs() / 0.001,
        ];
        if let (Some(a), Some(b)) = (fit.params.c_z, truth.c_z) {
            ratios.push((a - b).abs() / 0.07);
        }
        let worst = ratios.iter().copied().fold(0.0, f64::max);
        pass &= worst <= 3.0;
        details.push(format!("{label} 10 MHz max |err|/σ_table {worst:.2}"));
    }
    outcome(pass, details.join("; "))
}

fn c6_correction_efficacy() -> Result<Outcome> {
    let p = CircuitParams::fitted_1d();
    let model = Model::one_d();
    let base = SCurveConfig::default();
    let off = run_scurve(&p, model, &base, 1)?;
    let on = run_scurve(&p, model, &SCurveConfig { correction: true, ..base.clone() }, 1)?;
    let (wu, wc, cc) = (off.fit.width_mphi0, on.fit.width_mphi0, on.fit.center_mphi0);

    // wider window so every applied d keeps its transition on the grid
    let sweep = SCurveConfig {
        phi_z_min_mphi0: -30.0,
        phi_z_max_mphi0: 25.0,
        points: 111,
        refine: Refinement { coarse_step_mphi0: 3.0, ..base.refine },
        ..base
    };
    let ds = [0.0, 0.05, 0.08, 0.102, 0.125, 0.15];
    let rows = scan_correction_parameter(&p, model, &sweep, &ds, &[20.0], 7)?;
    let widths: Vec<f64> = rows.iter().map(|r| r.width_mphi0).collect();
    let d_min = parabolic_minimum(&ds, &widths);
    let pass = wc < wu && cc.abs() < 0.2 && (d_min - 0.102).abs() <= 0.02;
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{:.2}", r.applied_d, r.width_mphi0)).collect();
    outcome(
        pass,
        format!(
            "width uncorrected {wu:.3} ± {:.3}, corrected {wc:.3} ± {:.3} mΦ0, corrected centre {cc:.3} mΦ0; widths [{}], minimum at d = {d_min:.4}",
            off.fit.width_err_mphi0,
            on.fit.width_err_mphi0,
            table.join(" ")
        ),
    )
}

fn c7_ame_suite() -> Result<Outcome> {
    let bath = BathParams::default();
    // (a) detailed balance
    let mut kms: f64 = 0.0;
    for f in [0.1, 0.5, 1.0, 3.0, 10.0] {
        let w = 2.0 * PI * f;
        kms = kms.max((gamma(&bath, -w) / gamma(&bath, w) / (-w * bath.beta()).exp() - 1.0).abs());
    }
    let p = CircuitParams::fitted_1d();
    let model = Model::one_d();

    // (b) closed-system limit along a 60 ns anneal
    let spec = PathSpec::linear(FluxPoint::new(1.1 * PI, -0.75), FluxPoint::new(2.0 * PI, -0.75), 60.0).with_tilt(0.326 * PI);
    let path = make_linear_path(&spec)?;
    let cfg = SolverConfig { output_points: 61, ..Default::default() };
    let closed = evolve_ame(&p, &path, model, &BathParams { eta_g2: 0.0, ..bath }, &cfg)?;
    let reference = evolve_schrodinger(&p, &path, model, &cfg)?;
    let mut dev: f64 = 0.0;
    for (a, b) in closed.populations.iter().zip(&reference.populations) {
        for (x, y) in a.iter().zip(b) {
            dev = dev.max((x - y).abs());
        }
    }

    // (c) thermalisation at a static point
    let x = 1.5 * PI;
    let flux = FluxPoint::new(x, phi_d(&p, x));
    let static_path = make_linear_path(&PathSpec::linear(flux, flux, 100.0))?;
    let thermal = evolve_ame(&p, &static_path, model, &bath, &SolverConfig { output_points: 11, ..Default::default() })?;
    let gibbs = DensityMatrix::gibbs(&thermal.final_spectrum.eigenvalues, bath.temperature_mk);
    let td = thermal.final_state.trace_distance(&gibbs)?;

    // (d) trace along an open anneal with the default bath
    let open = evolve_ame(&p, &make_linear_path(&spec.with_idle(2.0))?, model, &bath, &SolverConfig { output_points: 11, ..Default::default() })?;
    let trace = [closed.diagnostics.max_trace_error, thermal.diagnostics.max_trace_error, open.diagnostics.max_trace_error]
        .into_iter()
        .fold(0.0, f64::max);
    let pass = kms <= 1e-12 && dev <= 1e-6 && td < 1e-3 && trace <= 1e-9;
    outcome(
        pass,
        format!(
            "(a) KMS rel err {kms:.1e}; (b) η=0 vs Schrödinger {dev:.1e}; (c) Gibbs trace distance {td:.1e} (ω01 = {:.3} GHz, excited {:.3}); (d) max trace error {trace:.1e}",
            thermal.final_spectrum.gap(0, 1),
            gibbs.populations()[1]
        ),
    )
}

fn c8_landau_zener() -> Result<Outcome> {
    let a = 0.05;
    let rate = 4.0 * PI * PI * a * a / 2f64.ln();
    let b0 = 25.0;
    let sweep = TwoLevelSweep::new(a, -b0, b0, 2.0 * b0 / rate)?;
    let cfg = SolverConfig { levels: 2, rel_tol: 1e-9, abs_tol: 1e-11, output_points: 2, ..Default::default() };
    let p = evolve_closed(&sweep, &cfg)?.final_populations()[1];
    let analytic = (-4.0 * PI * PI * a * a / rate).exp();
    outcome((p / analytic - 1.0).abs() < 0.01, format!("P = {p:.5}, analytic {analytic:.5}"))
}

fn c9_crossing_structure() -> Result<(Outcome, Vec<u8>)> {
    let cfg = CrossingConfig::default();
    let runs = scan_idle_times(&CircuitParams::fitted_1d(), Model::one_d(), &cfg, &[0.0, 2.0])?;
    let window = units::mphi0_to_rad(1.0);
    let avoided: Vec<_> = runs[0].catalog.iter().copied().filter(|c| c.avoided).collect();
    let mut worst: f64 = 0.0;
    let mut features = 0;
    for r in &runs {
        for f in &r.features {
            features += 1;
            worst = worst.max(distance_to_catalog(&avoided, f.phi_z0_rad).map_or(f64::INFINITY, units::rad_to_mphi0));
        }
    }
    // wherever the idled run peaks, the direct run is plateau-like
    let (direct, idled) = (&runs[0], &runs[1]);
    let mut peaks = Vec::new();
    let mut plateau_ok = true;
    for f in &idled.features {
        let drop = max_drop(&idled.phi_z0, &idled.p_right, f.phi_z0_rad, window);
        if drop > 0.1 {
            let before = max_drop(&direct.phi_z0, &direct.p_right, f.phi_z0_rad, window);
            plateau_ok &= before < 0.02;
            peaks.push(format!("{:.4} rad: drop {drop:.2} vs {before:.3}", f.phi_z0_rad));
        }
    }
    let pass = features > 0 && worst <= 1.0 && !peaks.is_empty() && plateau_ok;
    let csv = io::crossing_table(idled).to_bytes()?;
    Ok((
        Outcome {
            pass,
            detail: format!(
                "{features} features, max distance to avoided crossing {worst:.3} mΦ0; peaks (2 ns vs 0 ns drop): [{}]; {} points",
                peaks.join(", "),
                direct.phi_z0.len()
            ),
        },
        csv,
    ))
}

fn c10_ising_identities() -> Result<Outcome> {
    let p = CircuitParams::fitted_1d();
    let model = Model::one_d();
    let cm = CircuitModel::new(&p, model)?;
    let (mut valid, mut worst, mut bad) = (0, 0.0f64, 0);
    for x in linspace(1.3 * PI, 2.7 * PI, 50) {
        let pd = phi_d(&p, x);
        for dz in linspace(-0.02, 0.02, 50) {
            let flux = FluxPoint::new(x, pd + dz);
            let c = ising_coefficients(&p, flux, model)?;
            if !c.valid {
                continue;
            }
            valid += 1;
            let gap = cm.spectrum(flux, 2)?.gap(0, 1);
            worst = worst.max(((c.a * c.a + c.b * c.b).sqrt() - gap / 2.0).abs());
            if c.a < 0.0 || (dz != 0.0 && c.b.signum() != dz.signum()) {
                bad += 1;
            }
        }
    }
    outcome(valid > 0 && bad == 0 && worst <= 1e-9, format!("{valid}/2500 valid points, {bad} sign violations, max |√(A²+B²) − Δ/2| = {worst:.1e} GHz"))
}

fn c11_determinism(crossing_csv: Option<&[u8]>) -> Result<Outcome> {
    let p = CircuitParams::fitted_1d();
    let model = Model::OneD { n: 20 };
    let produce = || -> Result<Vec<(CsvTable, &'static str)>> {
        let map = csfq_core::circuit::gap_map(&p, model, (1.2 * PI, 2.8 * PI), (-0.1, 0.1), (7, 9))?;
        let sc = SCurveConfig {
            ramp: csfq_core::path::RiseShape::Linear,
            anneal_time_ns: 5.0,
            correction: true,
            phi_z_min_mphi0: -6.0,
            phi_z_max_mphi0: 6.0,
            points: 13,
            refine: Refinement { coarse_step_mphi0: 2.0, min_step_mphi0: 2.0, max_dp: 1.0, max_points: 20 },
            solver: SolverConfig { levels: 4, rel_tol: 1e-5, abs_tol: 1e-7, output_points: 2, ..Default::default() },
            resamples: 10,
            ..SCurveConfig::default()
        };
        let curve = run_scurve(&p, model, &sc, 42)?;
        let data = synthesize_spectroscopy(&p, model, &spectroscopy_fluxes(&p, &[1.5 * PI, 2.3 * PI], &[0.0, 0.01]), 0.01, true, true, 3)?;
        Ok(vec![
            (io::gap_map_table(&map), "phi_x_rad,phi_z_rad,omega01_GHz"),
            (io::scurve_table(&curve), "phi_z_rad,phi_z_mphi0,P_right,P_measured,sigma"),
            (io::dataset_table(&data), "phi_x_rad,phi_z_rad,omega01_GHz,omega02_GHz,sigma_GHz"),
        ])
    };
    let first = produce()?;
    let second = produce()?;
    let mut pass = true;
    for ((a, header), (b, _)) in first.iter().zip(&second) {
        let (ba, bb) = (a.to_bytes()?, b.to_bytes()?);
        pass &= ba == bb;
        pass &= conforms(&ba, header);
    }
    let mut detail = format!("{} table kinds regenerated byte-identically with documented headers", first.len());
    if let Some(csv) = crossing_csv {
        let header = format!("phi_z0_rad,P_right,{}", (0..10).map(|k| format!("pop_{k}")).collect::<Vec<_>>().join(","));
        pass &= conforms(csv, &header);
        detail.push_str("; crossing table header checked");
    }
    outcome(pass, detail)
}

/// Exact header, LF endings and a constant column count.
fn conforms(bytes: &[u8], header: &str) -> bool {
    let Ok(text) = std::str::from_utf8(bytes) else { return false };
    let cols = header.split(',').count();
    !text.contains('\r') && text.lines().next() == Some(header) && text.lines().skip(1).all(|l| l.split(',').count() == cols) && text.ends_with('\n')
}

fn main() -> ExitCode {
    let mut crossing_csv = None;
    let mut all = true;
    // ACCEPTANCE_ONLY=3,5 restricts the run to the listed criteria
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut report = |n: usize, name: &str, budget_s: f64, run: &mut dyn FnMut() -> Result<Outcome>| {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            println!("criterion {n:>2} {name}: SKIPPED");
            return;
        }
        let t0 = Instant::now();
        let result = run();
        let secs = t0.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && secs <= budget_s, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!("criterion {n:>2} {name}: {} — {detail} [{secs:.1} s, budget {budget_s:.0} s]", if pass { "PASS" } else { "FAIL" });
    };
    report(1, "effective temperature table", 1.0, &mut c1_effective_temperature);
    report(2, "energy scale", 1.0, &mut c2_energy_scale);
    report(3, "minimum-gap law", 60.0, &mut c3_minimum_gap_law);
    report(4, "asymmetry round trip", 300.0, &mut c4_asymmetry_round_trip);
    report(5, "spectroscopy fit round trip", 600.0, &mut c5_spectroscopy_round_trip);
    report(6, "correction efficacy", 600.0, &mut c6_correction_efficacy);
    report(7, "master-equation suite", 600.0, &mut c7_ame_suite);
    report(8, "Landau-Zener oracle", 60.0, &mut c8_landau_zener);
    report(9, "crossing-scan structure", 7200.0, &mut || {
        let (o, csv) = c9_crossing_structure()?;
        crossing_csv = Some(csv);
        Ok(o)
    });
    report(10, "Ising-map identities", 600.0, &mut c10_ising_identities);
    report(11, "determinism and format", 60.0, &mut || c11_determinism(crossing_csv.as_deref()));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
