//! Dense complex operators, sparse shift operators and Hermitian
//! eigendecomposition.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative Hermiticity tolerance for constructed operators.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Which basis an operator is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Cooper-pair number states `n ∈ [-n, n]`.
    Charge1D { n: usize },
    /// Transformed-coordinate charge states `(n0', n1')` restricted to the
    /// physical sector `n0' ≡ n1' (mod 2)`.
    Charge2D { n0: usize, n1: usize },
    /// Span of the lowest `dim` instantaneous eigenvectors.
    Subspace { dim: usize },
    /// Anything else (test matrices, toy models).
    Generic { dim: usize },
}

impl Basis {
    pub fn dim(&self) -> usize {
        match *self {
            Basis::Charge1D { n } => 2 * n + 1,
            Basis::Charge2D { n0, n1 } => charge2d_dim(n0, n1),
            Basis::Subspace { dim } | Basis::Generic { dim } => dim,
        }
    }
}

pub(crate) fn charge2d_dim(n0: usize, n1: usize) -> usize {
    let (n0, n1) = (n0 as i64, n1 as i64);
    let mut count = 0;
    for a in -n0..=n0 {
        for b in -n1..=n1 {
            if (a - b).rem_euclid(2) == 0 {
                count += 1;
            }
        }
    }
    count
}

/// A Hermitian operator together with its basis. Energies are in GHz,
/// currents in nA; the unit is implied by the constructor.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub basis: Basis,
    pub matrix: CMatrix,
}

impl OperatorMatrix {
    pub fn new(basis: Basis, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{}x{} matrix for basis of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                basis.dim()
            )));
        }
        Ok(Self { basis, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |H - H†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = max_abs(&self.matrix).max(f64::MIN_POSITIVE);
        self.hermitian_deviation() <= HERMITIAN_TOL * scale
    }

    pub fn check_same_basis(&self, other: &OperatorMatrix) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch(format!("{:?} vs {:?}", self.basis, other.basis)));
        }
        Ok(())
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Lowest eigenpairs of a Hermitian operator.
///
/// Eigenvalues ascend; each eigenvector is normalised and its largest-modulus
/// component is made real and positive, so matrix elements are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub basis: Basis,
    pub eigenvalues: Vec<f64>,
    /// `dim × k`, one eigenvector per column.
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `ε_j - ε_i`.
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.eigenvalues[j] - self.eigenvalues[i]
    }

    /// `⟨ε_a| op |ε_b⟩` for all retained levels.
    pub fn matrix_elements(&self, op: &OperatorMatrix) -> Result<CMatrix> {
        if op.basis != self.basis {
            return Err(Error::BasisMismatch(format!(
                "operator in {:?}, spectrum in {:?}",
                op.basis, self.basis
            )));
        }
        Ok(project(&op.matrix, &self.eigenvectors))
    }

    /// Largest `‖H v − λ v‖` over the retained pairs.
    pub fn max_residual(&self, op: &OperatorMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(k);
            let r = &op.matrix * v - v * C64::new(lambda, 0.0);
            worst = worst.max(r.norm());
        }
        worst
    }
}

/// Lowest `k` eigenpairs of a Hermitian operator.
pub fn eigensolve(op: &OperatorMatrix, k: usize) -> Result<Spectrum> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::LevelOutOfRange { requested: k, dim });
    }
    if !op.is_hermitian() {
        return Err(Error::NotHermitian { deviation: op.hermitian_deviation() });
    }
    let (values, vectors) = dense_eigh(&op.matrix, k);
    Ok(Spectrum { basis: op.basis, eigenvalues: values, eigenvectors: vectors })
}

/// Full Hermitian eigendecomposition backend. Returns the lowest `k` pairs,
/// ascending and phase-fixed. Small matrices go through nalgebra, larger
/// ones through faer.
pub(crate) fn dense_eigh(m: &CMatrix, k: usize) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let (mut pairs, vecs): (Vec<(f64, usize)>, CMatrix) = if n <= 24 {
        let eig = m.clone().symmetric_eigen();
        let pairs = eig.eigenvalues.iter().copied().enumerate().map(|(i, v)| (v, i)).collect();
        (pairs, eig.eigenvectors)
    } else {
        let fm = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| {
            // faer reads only the lower triangle; symmetrise explicitly
            let z = if i >= j { m[(i, j)] } else { m[(j, i)].conj() };
            faer::c64::new(z.re, z.im)
        });
        let evd = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("self-adjoint eigendecomposition failed");
        let s = evd.S().column_vector();
        let u = evd.U();
        let pairs = (0..n).map(|i| (s[i].re, i)).collect();
        let vecs = CMatrix::from_fn(n, n, |i, j| {
            let z = u[(i, j)];
            C64::new(z.re, z.im)
        });
        (pairs, vecs)
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);
    let mut out = CMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (col, &(val, src)) in pairs.iter().enumerate() {
        values.push(val);
        let mut v = vecs.column(src).into_owned();
        fix_phase(v.as_mut_slice());
        out.set_column(col, &v);
    }
    (values, out)
}

/// Normalise and rotate so the largest-modulus component is real positive.
pub(crate) fn fix_phase(v: &mut [C64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        // ties broken toward the lowest index
        if z.norm() > best_abs * (1.0 + 1e-10) {
            best_abs = z.norm();
            best = i;
        }
    }
    if best_abs <= 0.0 || norm == 0.0 {
        return;
    }
    let phase = v[best].conj() / v[best].norm();
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
}

/// `V† A V`.
pub fn project(a: &CMatrix, v: &CMatrix) -> CMatrix {
    v.adjoint() * (a * v)
}

/// Closest unitary to `m` in the Frobenius norm (polar factor `U W†` of the
/// SVD `m = U Σ W†`).
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let vt = svd.v_t.expect("right singular vectors");
    u * vt
}

/// Sparse operator with real entries, used for the charge-basis shift and
/// diagonal terms of the circuit Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    pub dim: usize,
    /// `(row, col, value)`
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseOp {
    pub fn diagonal(values: &[f64]) -> Self {
        Self {
            dim: values.len(),
            entries: values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect() }
    }

    /// Accumulate `coef · self` into a dense matrix.
    pub fn add_to(&self, out: &mut CMatrix, coef: C64) {
        for &(r, c, v) in &self.entries {
            out[(r, c)] += coef * v;
        }
    }

    /// `self · v` for a dense block of column vectors.
    pub fn mul_dense(&self, v: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, v.ncols());
        for &(r, c, x) in &self.entries {
            for k in 0..v.ncols() {
                out[(r, k)] += v[(c, k)] * x;
            }
        }
        out
    }

    /// `V† self V`.
    pub fn project(&self, v: &CMatrix) -> CMatrix {
        v.adjoint() * self.mul_dense(v)
    }
}

/// Eigendecomposition of a small Hermitian matrix; ascending, phase-fixed.
pub fn small_eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    dense_eigh(m, m.nrows())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}
