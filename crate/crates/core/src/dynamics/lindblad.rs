//! Bohr-frequency binning and the Davies generator built from it.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, OperatorMatrix, Spectrum, C64};

use super::bath::Bath;

/// Dyads `|a⟩⟨b|` sharing (within tolerance) the Bohr frequency `ε_b − ε_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct BohrBin {
    pub omega: f64,
    pub pairs: Vec<(usize, usize)>,
}

/// Group all level pairs by Bohr frequency. Positive frequencies are merged
/// by single linkage within `tol`; negative bins mirror positive ones, so
/// `L_{−ω} = L_ω†` holds exactly; `|ω| ≤ tol` goes to the zero bin.
pub fn bohr_bins(energies: &[f64], tol: f64) -> Vec<BohrBin> {
    let k = energies.len();
    let mut zero = Vec::new();
    let mut positive: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..k {
        for b in 0..k {
            let w = energies[b] - energies[a];
            if w.abs() <= tol {
                zero.push((a, b));
            } else if w > 0.0 {
                positive.push((w, a, b));
            }
        }
    }
    positive.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut bins = vec![BohrBin { omega: 0.0, pairs: zero }];
    let mut current: Vec<(f64, usize, usize)> = Vec::new();
    let flush = |current: &mut Vec<(f64, usize, usize)>, bins: &mut Vec<BohrBin>| {
        if current.is_empty() {
            return;
        }
        let omega = current.iter().map(|c| c.0).sum::<f64>() / current.len() as f64;
        let pairs: Vec<(usize, usize)> = current.iter().map(|c| (c.1, c.2)).collect();
        let mirrored = pairs.iter().map(|&(a, b)| (b, a)).collect();
        bins.push(BohrBin { omega, pairs });
        bins.push(BohrBin { omega: -omega, pairs: mirrored });
        current.clear();
    };
    for p in positive {
        if let Some(last) = current.last() {
            if p.0 - last.0 > tol {
                flush(&mut current, &mut bins);
            }
        }
        current.push(p);
    }
    flush(&mut current, &mut bins);
    bins
}

/// A Lindblad operator in the energy eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladOp {
    /// Bohr frequency, in the unit of the spectrum (GHz for circuit spectra).
    pub omega: f64,
    pub matrix: CMatrix,
}

/// `L_ω = Σ_{ε_b−ε_a≈ω} ⟨ε_a|A|ε_b⟩ |ε_a⟩⟨ε_b|` for every Bohr bin of the
/// retained levels, `A` being the coupling operator `ip`.
pub fn lindblad_ops(spectrum: &Spectrum, ip: &OperatorMatrix, bin_tol: f64) -> Result<Vec<LindbladOp>> {
    if spectrum.basis != ip.basis {
        return Err(Error::BasisMismatch(format!("spectrum in {:?}, operator in {:?}", spectrum.basis, ip.basis)));
    }
    let a = spectrum.matrix_elements(ip)?;
    let k = spectrum.len();
    Ok(bohr_bins(&spectrum.eigenvalues, bin_tol)
        .into_iter()
        .filter(|bin| !bin.pairs.is_empty())
        .map(|bin| {
            let mut m = CMatrix::zeros(k, k);
            for &(i, j) in &bin.pairs {
                m[(i, j)] = a[(i, j)];
            }
            LindbladOp { omega: bin.omega, matrix: m }
        })
        .collect())
}

/// Dissipator `D(ρ)` and Lamb shift `H_LS` for one coupling matrix `A`
/// (energy eigenbasis) and its Bohr bins; everything in rad/ns.
pub(crate) struct Davies {
    pub lamb: CMatrix,
    /// `Σ γ L†L`
    g: CMatrix,
    /// `(γ, [(a, b, A_ab)])` per bin
    jumps: Vec<(f64, Vec<(usize, usize, C64)>)>,
}

impl Davies {
    pub fn new(bath: &Bath, energies: &[f64], a: &CMatrix) -> Result<Self> {
        let k = energies.len();
        let mut g = CMatrix::zeros(k, k);
        let mut lamb = CMatrix::zeros(k, k);
        let mut jumps = Vec::new();
        for bin in bohr_bins(energies, bath.bin_tol()) {
            let terms: Vec<(usize, usize, C64)> =
                bin.pairs.iter().map(|&(i, j)| (i, j, a[(i, j)])).filter(|t| t.2.norm_sqr() > 0.0).collect();
            if terms.is_empty() {
                continue;
            }
            let rate = bath.gamma(bin.omega);
            let shift = bath.lamb_shift(bin.omega)?;
            // (L†L)_{b b'} = Σ_a conj(A_ab) A_ab'
            for &(i, j, x) in &terms {
                for &(i2, j2, y) in &terms {
                    if i == i2 {
                        let v = x.conj() * y;
                        g[(j, j2)] += v * rate;
                        lamb[(j, j2)] += v * shift;
                    }
                }
            }
            jumps.push((rate, terms));
        }
        Ok(Self { lamb, g, jumps })
    }

    /// `Σ γ (L ρ L† − ½{L†L, ρ})`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let half = C64::new(0.5, 0.0);
        let mut out = -(&self.g * rho + rho * &self.g) * half;
        for (rate, terms) in &self.jumps {
            for &(a, b, x) in terms {
                for &(a2, b2, y) in terms {
                    out[(a, a2)] += x * rho[(b, b2)] * y.conj() * *rate;
                }
            }
        }
        out
    }
}
