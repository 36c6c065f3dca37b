//! Moving-frame propagator shared by the closed and open evolutions.

use std::f64::consts::PI;

use super::bath::Bath;
use super::lindblad::Davies;
use super::ode::{dopri5_step, step_factor, Tolerances};
use super::system::DrivenSystem;
use super::{hermitian_part, DensityMatrix, Diagnostics, EvolutionResult, Snapshot, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, Basis, CMatrix, OperatorMatrix, Spectrum, C64};

const TWO_PI: f64 = 2.0 * PI;

/// Lowest `K` eigenvectors of the full Hamiltonian at `t`, with every
/// operator of the drive projected onto them.
struct Frame {
    vectors: CMatrix,
    /// GHz
    energies: Vec<f64>,
    proj: Vec<CMatrix>,
    /// Energies of the interaction picture, rad/ns (includes the diagonal
    /// Lamb shift for open evolution).
    omega: Vec<f64>,
}

impl Frame {
    fn new<S: DrivenSystem>(sys: &S, t: f64, k: usize, bath: Option<&Bath>) -> Result<Self> {
        let full = sys.dense(&sys.h_coefficients(t));
        let (energies, vectors) = linalg::dense_eigh(&full, k);
        let proj: Vec<CMatrix> = sys.operators().iter().map(|o| o.project(&vectors)).collect();
        let mut omega: Vec<f64> = energies.iter().map(|e| TWO_PI * e).collect();
        if let Some(bath) = bath.filter(|b| !b.is_closed()) {
            let a = combine(&proj, &sys.coupling_coefficients(t)) * C64::new(TWO_PI, 0.0);
            let davies = Davies::new(bath, &omega, &a)?;
            for (i, w) in omega.iter_mut().enumerate() {
                *w += davies.lamb[(i, i)].re;
            }
        }
        Ok(Self { vectors, energies, proj, omega })
    }

    /// `Σ c_k P_k + c_k* P_k†` in GHz.
    fn operator(&self, c: &[C64]) -> CMatrix {
        combine(&self.proj, c)
    }
}

fn combine(proj: &[CMatrix], c: &[C64]) -> CMatrix {
    let k = proj[0].nrows();
    let mut m = CMatrix::zeros(k, k);
    for (p, &ck) in proj.iter().zip(c) {
        if ck != C64::new(0.0, 0.0) {
            m += p * ck + p.adjoint() * ck.conj();
        }
    }
    m
}

fn phases(omega: &[f64], dt: f64) -> Vec<C64> {
    omega.iter().map(|&w| C64::from_polar(1.0, -w * dt)).collect()
}

fn as_matrix(y: &[C64], k: usize) -> CMatrix {
    CMatrix::from_column_slice(k, k, y)
}

/// Right-hand side in the interaction picture of `frame`, whose reference
/// time is `t0`.
fn rhs<S: DrivenSystem>(
    sys: &S,
    frame: &Frame,
    bath: Option<&Bath>,
    t0: f64,
    tau: f64,
    y: &[C64],
    dy: &mut [C64],
) -> Result<()> {
    let k = frame.omega.len();
    let ph = phases(&frame.omega, tau - t0);
    // H_k(τ) − diag(Ω), rad/ns
    let mut gen = frame.operator(&sys.h_coefficients(tau)) * C64::new(TWO_PI, 0.0);
    for i in 0..k {
        gen[(i, i)] -= frame.omega[i];
    }
    let minus_i = C64::new(0.0, -1.0);
    if y.len() == k {
        let psi = nalgebra::DVector::from_iterator(k, y.iter().zip(&ph).map(|(a, p)| a * p));
        let d = (&gen * psi) * minus_i;
        for i in 0..k {
            dy[i] = d[i] * ph[i].conj();
        }
        return Ok(());
    }
    let mut rho = as_matrix(y, k);
    for j in 0..k {
        for i in 0..k {
            rho[(i, j)] *= ph[i] * ph[j].conj();
        }
    }
    let mut out = (&gen * &rho - &rho * &gen) * minus_i;
    if let Some(bath) = bath.filter(|b| !b.is_closed()) {
        let hk = frame.operator(&sys.h_coefficients(tau)) * C64::new(TWO_PI, 0.0);
        let (eps, w) = linalg::small_eigh(&hk);
        let a = frame.operator(&sys.coupling_coefficients(tau)) * C64::new(TWO_PI, 0.0);
        let a_w = w.adjoint() * &a * &w;
        let davies = Davies::new(bath, &eps, &a_w)?;
        let rho_w = w.adjoint() * &rho * &w;
        let lamb = &davies.lamb;
        let inner = (lamb * &rho_w - &rho_w * lamb) * minus_i + davies.apply(&rho_w);
        out += &w * inner * w.adjoint();
    }
    for j in 0..k {
        for i in 0..k {
            dy[i + j * k] = out[(i, j)] * ph[i].conj() * ph[j];
        }
    }
    Ok(())
}

/// Merge and sort the times where the integrator must stop exactly.
fn stop_times(duration: f64, outputs: &[f64], extra: &[f64]) -> Vec<f64> {
    let tol = 1e-12 * duration.max(1.0);
    let mut stops: Vec<f64> = outputs.iter().chain(extra).copied().filter(|&t| t > tol && t <= duration + tol).map(|t| t.min(duration)).collect();
    stops.push(duration);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= tol);
    stops
}

fn matches(t: f64, target: f64, duration: f64) -> bool {
    (t - target).abs() <= 1e-12 * duration.max(1.0)
}

fn to_density(y: &[C64], k: usize) -> DensityMatrix {
    let basis = Basis::Subspace { dim: k };
    if y.len() == k {
        DensityMatrix::pure(basis, y).expect("dimension matches")
    } else {
        DensityMatrix { basis, matrix: as_matrix(y, k) }
    }
}

fn populations(y: &[C64], k: usize) -> Vec<f64> {
    if y.len() == k {
        y.iter().map(|z| z.norm_sqr()).collect()
    } else {
        (0..k).map(|i| y[i + i * k].re).collect()
    }
}

struct Run<'a, S: DrivenSystem> {
    sys: &'a S,
    bath: Option<&'a Bath>,
    cfg: &'a SolverConfig,
    k: usize,
    scale: f64,
}

impl<S: DrivenSystem> Run<'_, S> {
    fn snapshot(&self, t: f64, frame: &Frame, y: &[C64]) -> Snapshot {
        Snapshot { t, state: to_density(y, self.k), spectrum: self.spectrum(frame), ip: self.ip(t, frame) }
    }

    fn spectrum(&self, frame: &Frame) -> Spectrum {
        Spectrum { basis: self.sys.basis(), eigenvalues: frame.energies.clone(), eigenvectors: frame.vectors.clone() }
    }

    fn ip(&self, t: f64, frame: &Frame) -> OperatorMatrix {
        let m = frame.operator(&self.sys.coupling_coefficients(t)) * C64::new(self.scale, 0.0);
        OperatorMatrix { basis: Basis::Subspace { dim: self.k }, matrix: hermitian_part(&m) }
    }

    fn execute(&self, pure: bool) -> Result<EvolutionResult> {
        let (sys, cfg, k) = (self.sys, self.cfg, self.k);
        cfg.validate(sys.dim())?;
        let duration = sys.duration();
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidConfig(format!("evolution duration must be positive, got {duration}")));
        }
        if let Some(&t) = cfg.snapshot_times.iter().find(|&&t| t > duration * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange { t, end: duration });
        }
        let n_out = cfg.output_points;
        let outputs: Vec<f64> = (0..n_out).map(|i| duration * i as f64 / (n_out - 1) as f64).collect();
        let mut extra = cfg.snapshot_times.clone();
        extra.extend(sys.breakpoints());
        let stops = stop_times(duration, &outputs, &extra);

        let mut frame = Frame::new(sys, 0.0, k, self.bath)?;
        let mut y = vec![C64::new(0.0, 0.0); if pure { k } else { k * k }];
        y[0] = C64::new(1.0, 0.0);

        let mut diag = Diagnostics { min_eigenvalue: f64::INFINITY, ..Default::default() };
        let mut times = Vec::with_capacity(n_out);
        let mut pops = Vec::with_capacity(n_out);
        let mut snapshots = Vec::new();
        let mut next_output = 0;
        let mut record = |t: f64, frame: &Frame, y: &[C64], times: &mut Vec<f64>, pops: &mut Vec<Vec<f64>>, snaps: &mut Vec<Snapshot>, diag: &mut Diagnostics| {
            while next_output < n_out && (matches(t, outputs[next_output], duration) || outputs[next_output] < t) {
                let p = populations(y, k);
                diag.max_population_error = diag.max_population_error.max((p.iter().sum::<f64>() - 1.0).abs());
                times.push(outputs[next_output]);
                pops.push(p);
                next_output += 1;
            }
            for &ts in &cfg.snapshot_times {
                if matches(t, ts, duration) {
                    snaps.push(self.snapshot(t, frame, y));
                }
            }
        };
        record(0.0, &frame, &y, &mut times, &mut pops, &mut snapshots, &mut diag);

        let tol = Tolerances { rel: cfg.rel_tol, abs: cfg.abs_tol };
        let mut t = 0.0;
        let mut h = cfg.initial_step.min(cfg.max_step);
        let t_eps = 1e-12 * duration.max(1.0);
        for &stop in &stops {
            while stop - t > t_eps {
                let remaining = stop - t;
                let mut h_try = h.min(cfg.max_step);
                let clipped = h_try * 1.01 >= remaining;
                if clipped {
                    h_try = remaining;
                }
                let t0 = t;
                let mut f = |tau: f64, yy: &[C64], dy: &mut [C64]| rhs(sys, &frame, self.bath, t0, tau, yy, dy);
                let (y_new, mut err) = dopri5_step(&mut f, t0, &y, h_try, tol)?;
                if !err.is_finite() {
                    err = f64::INFINITY;
                }
                if err > 1.0 {
                    diag.rejected_steps += 1;
                    h = h_try * step_factor(err).min(0.9);
                    if h < cfg.min_step {
                        return Err(Error::StepFailure { t, h });
                    }
                    continue;
                }
                let t_new = if clipped { stop } else { t0 + h_try };
                let new_frame = Frame::new(sys, t_new, k, self.bath)?;
                y = self.rotate(&frame, &new_frame, &y_new, h_try, t_new, &mut diag)?;
                frame = new_frame;
                t = t_new;
                diag.accepted_steps += 1;
                let proposal = h_try * step_factor(err);
                h = if clipped { h.max(proposal) } else { proposal };
            }
            t = stop;
            record(t, &frame, &y, &mut times, &mut pops, &mut snapshots, &mut diag);
        }

        if !pure {
            let last = self.positivity(&y, t)?;
            diag.min_eigenvalue = diag.min_eigenvalue.min(last);
        } else {
            diag.min_eigenvalue = 0.0;
        }
        Ok(EvolutionResult {
            times,
            populations: pops,
            final_state: to_density(&y, k),
            final_spectrum: self.spectrum(&frame),
            final_ip: self.ip(t, &frame),
            snapshots,
            diagnostics: diag,
        })
    }

    fn positivity(&self, y: &[C64], t: f64) -> Result<f64> {
        let min = linalg::small_eigh(&as_matrix(y, self.k)).0[0];
        if min < -self.cfg.positivity_tol {
            return Err(Error::PositivityViolation { t, min_eigenvalue: min });
        }
        Ok(min)
    }

    /// Leave the interaction picture after a step of `dt` and express the
    /// state in the eigenbasis of `new`.
    fn rotate(&self, old: &Frame, new: &Frame, y: &[C64], dt: f64, t: f64, diag: &mut Diagnostics) -> Result<Vec<C64>> {
        let k = self.k;
        let ph = phases(&old.omega, dt);
        let o = linalg::polar_unitary(&(new.vectors.adjoint() * &old.vectors));
        if y.len() == k {
            let psi = nalgebra::DVector::from_iterator(k, y.iter().zip(&ph).map(|(a, p)| a * p));
            let out = o * psi;
            let norm = out.norm_squared();
            diag.max_trace_error = diag.max_trace_error.max((norm - 1.0).abs());
            return Ok(out.as_slice().to_vec());
        }
        let mut rho = as_matrix(y, k);
        for j in 0..k {
            for i in 0..k {
                rho[(i, j)] *= ph[i] * ph[j].conj();
            }
        }
        let rotated = &o * rho * o.adjoint();
        diag.max_hermitian_error = diag.max_hermitian_error.max(linalg::hermitian_deviation(&rotated));
        let rho = hermitian_part(&rotated);
        diag.max_trace_error = diag.max_trace_error.max((linalg::trace(&rho) - C64::new(1.0, 0.0)).norm());
        let min = self.positivity(rho.as_slice(), t)?;
        diag.min_eigenvalue = diag.min_eigenvalue.min(min);
        Ok(rho.as_slice().to_vec())
    }
}

/// Norm-preserving evolution of the ground state at `t = 0`.
pub fn evolve_closed<S: DrivenSystem>(sys: &S, config: &SolverConfig) -> Result<EvolutionResult> {
    Run { sys, bath: None, cfg: config, k: config.levels, scale: sys.current_scale() }.execute(true)
}

/// Adiabatic master equation for the ground state at `t = 0`.
pub fn evolve_open<S: DrivenSystem>(sys: &S, bath: &Bath, config: &SolverConfig) -> Result<EvolutionResult> {
    Run { sys, bath: Some(bath), cfg: config, k: config.levels, scale: sys.current_scale() }.execute(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::system::TwoLevelSweep;

    #[test]
    fn stops_are_sorted_unique_and_end_at_duration() {
        let s = stop_times(10.0, &[0.0, 5.0, 10.0], &[5.0, 2.5, 12.0, 10.0 + 1e-14]);
        assert_eq!(s, vec![2.5, 5.0, 10.0]);
    }

    #[test]
    fn static_two_level_populations_constant() {
        let sys = TwoLevelSweep::new(0.3, 0.2, 0.2, 30.0).unwrap();
        let cfg = SolverConfig { levels: 2, ..Default::default() };
        let r = evolve_closed(&sys, &cfg).unwrap();
        for p in &r.populations {
            assert!((p[0] - 1.0).abs() < 1e-8);
        }
    }
}
