//! Cross-checks against independent constructions: a phase-grid
//! discretisation of the 1D circuit, a second dense eigensolver, closed-form
//! bath integrals and the Landau–Zener formula.

use std::f64::consts::PI;

use csfq_core::circuit::{phi_d, CircuitModel};
use csfq_core::dynamics::{evolve_closed, gamma, lamb_shift_S, BathParams, SolverConfig, TwoLevelSweep};
use csfq_core::linalg::{eigensolve, Basis, CMatrix, OperatorMatrix, C64};
use csfq_core::{CircuitParams, FluxPoint, Model};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const E: f64 = 1.602_176_634e-19;
const H: f64 = 6.626_070_15e-34;
const KB: f64 = 1.380_649e-23;

/// Periodic phase grid (Fourier DVR) for the 1D Hamiltonian: the potential
/// is diagonal and the kinetic term `E_C n²` is built from the discrete
/// Fourier series. Returns eigenvalues (GHz), eigenvectors and the grid.
fn dvr_1d(p: &CircuitParams, flux: FluxPoint, m: usize) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let ec = E * E / (2.0 * p.c_sh * 1e-15) / H * 1e-9;
    let ej = p.i_z * 1e-9 / (4.0 * PI * E) * 1e-9;
    let (x, z) = (flux.phi_x + p.phi_x_offset, flux.phi_z + p.phi_z_offset);
    let pd = (p.d * (x / 2.0).tan()).atan();
    let xf = (x / 2.0).cos() * (1.0 + pd.tan().powi(2)).sqrt();
    let grid: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
    let nmax = (m as i64 - 1) / 2;
    let mut h = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            let dphi = grid[j] - grid[k];
            h[(j, k)] = (-nmax..=nmax).map(|n| ec * (n * n) as f64 * (n as f64 * dphi).cos()).sum::<f64>() / m as f64;
        }
        let phi = grid[j];
        h[(j, j)] += -2.0 * ej * (phi - z / 2.0).cos() - 2.0 * p.alpha * ej * xf * (2.0 * phi - pd).cos();
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors, grid)
}

#[test]
fn phase_grid_spectrum_matches_charge_basis() {
    let p = CircuitParams::fitted_1d();
    let cm = CircuitModel::new(&p, Model::one_d()).unwrap();
    for (x, dz) in [(1.3 * PI, 0.0), (1.6 * PI, 0.01), (2.0 * PI, -0.02), (2.5 * PI, 0.005)] {
        let flux = FluxPoint::new(x, phi_d(&p, x) + dz);
        let (dvr, _, _) = dvr_1d(&p, flux, 121);
        let s = cm.spectrum(flux, 3).unwrap();
        for j in 1..3 {
            let w_dvr = dvr[j] - dvr[0];
            assert!((s.gap(0, j) - w_dvr).abs() < 1e-7, "ω0{j} at {flux:?}: {} vs {w_dvr}", s.gap(0, j));
        }
        assert!((s.eigenvalues[0] - dvr[0]).abs() < 1e-7);
    }
}

#[test]
fn persistent_current_matches_phase_grid_expectation() {
    let p = CircuitParams::fitted_1d();
    let cm = CircuitModel::new(&p, Model::one_d()).unwrap();
    let flux = FluxPoint::new(1.9 * PI, phi_d(&p, 1.9 * PI) + 0.004);
    let (_, vecs, grid) = dvr_1d(&p, flux, 121);
    for level in 0..2 {
        // Î_p = I_z sin(φ − φ_z/2) in nA
        let oracle: f64 = grid.iter().enumerate().map(|(j, &phi)| vecs[(j, level)].powi(2) * p.i_z * (phi - flux.phi_z / 2.0).sin()).sum();
        let s = cm.spectrum(flux, 2).unwrap();
        let ip = s.matrix_elements(&cm.persistent_current(flux)).unwrap();
        assert!((ip[(level, level)].re - oracle).abs() < 1e-6 * p.i_z, "level {level}: {} vs {oracle}", ip[(level, level)].re);
    }
}

#[test]
fn random_hermitian_matches_second_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 50;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(rng.random_range(-5.0..5.0), 0.0);
        for j in 0..i {
            let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    let mut reference: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    reference.sort_by(f64::total_cmp);
    let op = OperatorMatrix::new(Basis::Generic { dim: n }, m).unwrap();
    let s = eigensolve(&op, n).unwrap();
    for (a, b) in s.eigenvalues.iter().zip(&reference) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    assert!(s.max_residual(&op) < 1e-10);
}

#[test]
fn josephson_scale_of_fitted_device() {
    // I_z Φ0 / (2π h) = I_z / (4π e)
    let ej = 228e-9 / (4.0 * PI * E) / 1e9;
    assert!((ej - 113.25).abs() < 0.01, "{ej}");
    assert!((csfq_core::units::josephson_energy_ghz(228.0) - ej).abs() < 1e-9);
}

#[test]
fn bath_rate_regression() {
    let bath = BathParams::default();
    let w = 2.0 * PI;
    // βħω at 1 GHz and 10 mK
    let x = H * 1e9 / (KB * 10e-3);
    assert!((x - 4.799).abs() < 1e-3, "{x}");
    let expected = 3e-6 * 2.0 * PI * w * (-1.0f64 / 15.0).exp() / (1.0 - (-x).exp());
    assert!((gamma(&bath, w) / expected - 1.0).abs() < 1e-12);
    // γ(2π·1 GHz) = 1.117171e-4 ns⁻¹ at the default bath
    assert!((gamma(&bath, w) - 1.117_171e-4).abs() < 1e-10, "{}", gamma(&bath, w));
    assert!((gamma(&bath, -w) / gamma(&bath, w) - (-x).exp()).abs() < 1e-12);
}

/// Exponential integral `Ei(x)` by its power series.
fn ei(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= x / k as f64;
        sum += term / k as f64;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    0.577_215_664_901_532_9 + x.abs().ln() + sum
}

#[test]
fn lamb_shift_zero_temperature_limit() {
    // T → 0: S(ω) = η g² ω_c [a e^{−a} Ei(a) − 1], a = ω/ω_c
    let bath = BathParams { temperature_mk: 0.05, ..BathParams::default() };
    let wc = bath.omega_c();
    for f in [0.5, 1.0, 3.0, 7.5, -2.0] {
        let w = 2.0 * PI * f;
        let a = w / wc;
        let oracle = bath.eta_g2 * wc * (a * (-a).exp() * ei(a) - 1.0);
        let s = lamb_shift_S(&bath, w).unwrap();
        assert!((s - oracle).abs() < 1e-4 * oracle.abs(), "f = {f}: {s} vs {oracle}");
    }
}

#[test]
fn landau_zener_transition_probability() {
    // H = A σx + (B/2) σz, B swept at rate v: P = exp(−4π² A² / v)
    let a = 0.05;
    let v = 4.0 * PI * PI * a * a / 2f64.ln();
    let b0 = 25.0;
    let sweep = TwoLevelSweep::new(a, -b0, b0, 2.0 * b0 / v).unwrap();
    let cfg = SolverConfig { levels: 2, rel_tol: 1e-9, abs_tol: 1e-11, output_points: 2, ..Default::default() };
    let r = evolve_closed(&sweep, &cfg).unwrap();
    let p = r.final_populations()[1];
    assert!((p - 0.5).abs() < 0.005, "P_LZ = {p}");
}
