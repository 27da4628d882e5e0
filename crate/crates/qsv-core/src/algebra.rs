//! Dense complex linear algebra on small matrices: the numerical substrate
//! for all state and channel arithmetic.
//!
//! Matrices are row-major `Vec<Complex64>` with validated shapes and finite
//! entries. The only nontrivial routine is `hermitian_eig`, a cyclic Jacobi
//! eigensolver for Hermitian matrices: at the dimensions this crate targets
//! (≤ ~128) it is simple, numerically robust, and dependency-free.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Dense complex matrix in row-major order.
///
/// Invariants: `entries.len() == rows * cols`, every entry finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, validating the invariants.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::WrongEntryCount { expected: rows * cols, got: entries.len() });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, entries })
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    /// Square matrix with the given real diagonal.
    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| {
            if i == j { Complex64::new(values[i], 0.0) } else { Complex64::new(0.0, 0.0) }
        })
    }

    /// Rank-one projector `v v† / ‖v‖²`.
    pub fn projector(v: &[Complex64]) -> Result<Self> {
        let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq <= 0.0 || !norm_sq.is_finite() {
            return Err(Error::NonFinite);
        }
        let n = v.len();
        Ok(Self::from_fn(n, n, |i, j| v[i] * v[j].conj() / norm_sq))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Entry at `(i, j)`; panics if out of range.
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j]
    }

    /// Overwrites the entry at `(i, j)`; panics if out of range.
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.entries[i * self.cols + j] = value;
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let entries = self.entries.iter().map(|a| a * factor).collect();
        Self { rows: self.rows, cols: self.cols, entries }
    }

    /// Matrix product `self · other`.
    ///
    /// Skips exact-zero entries of the left factor, so products with the
    /// permutation and block-diagonal superoperators the combinators build
    /// cost O(nonzeros × cols) instead of O(n³).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(self.rows, self.cols, other.rows, other.cols));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.entries[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = k * other.cols;
                let dst = i * other.cols;
                for j in 0..other.cols {
                    out.entries[dst + j] += a * other.entries[row + j];
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != v.len() {
            return Err(Error::ShapeMismatch(self.rows, self.cols, v.len(), 1));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = i * self.cols;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..self.cols {
                let a = self.entries[row + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                acc += a * v[k];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self.at(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|z| z.norm_sqr()).sum())
    }

    /// Largest entry-wise absolute difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert!(self.rows == other.rows && self.cols == other.cols);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖M − M†‖_F`, zero exactly when Hermitian.
    pub fn hermiticity_deviation(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self.at(i, j) - self.at(j, i).conj()).norm_sqr();
            }
        }
        libm::sqrt(acc)
    }

    /// Hermitian part `(M + M†)/2`; used to stop round-off drift after
    /// channel application.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self.at(i, j) + self.at(j, i).conj()) * Complex64::new(0.5, 0.0)
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(self.rows, self.cols, other.rows, other.cols));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Spectral decomposition
// ---------------------------------------------------------------------------

/// Eigendecomposition `M = V diag(λ) V†` of a Hermitian matrix.
///
/// Invariants: eigenvalues real and sorted descending; `V` unitary within
/// [`tol::RECONSTRUCT`]; reconstruction matches the input within the same
/// bound (Frobenius).
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary matrix whose columns are the eigenvectors, ordered like the
    /// eigenvalues.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Column `k` of `V` as a vector.
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.eigenvectors.rows()).map(|i| self.eigenvectors.at(i, k)).collect()
    }

    /// `V diag(f(λ)) V†`.
    pub fn map_eigenvalues(&self, mut f: impl FnMut(f64) -> f64) -> Matrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        Matrix::from_fn(n, n, |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += v.at(i, k) * v.at(j, k).conj() * mapped[k];
            }
            acc
        })
    }

    /// `V diag(λ) V†`.
    pub fn reconstruct(&self) -> Matrix {
        self.map_eigenvalues(|l| l)
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Preconditions: square and Hermitian within [`tol::HERMITIAN`]. Sweeps
/// run until the off-diagonal Frobenius norm drops below
/// [`tol::JACOBI_OFFDIAG`]. Eigenvalues come back sorted descending.
pub fn hermitian_eig(m: &Matrix) -> Result<SpectralDecomposition> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.rows(), m.cols()));
    }
    let dev = m.hermiticity_deviation();
    if dev > tol::HERMITIAN {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.rows();
    // Symmetrize first so the tolerated asymmetry cannot bias the sweep.
    let mut a = m.hermitian_part();
    let mut v = Matrix::identity(n);

    for _ in 0..tol::JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol::JACOBI_OFFDIAG {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.at(p, q);
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // Peel the phase off a_pq, then do a real Jacobi rotation:
                // with u = a_pq/|a_pq| the 2x2 block D† A D over columns
                // (p,q), D = diag(u, 1), is real symmetric.
                let u = apq / mag;
                let app = a.at(p, p).re;
                let aqq = a.at(q, q).re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                // J restricted to (p,q): [[u c, u s], [-s, c]].
                let jpp = u * c;
                let jpq = u * s;
                let jqp = Complex64::new(-s, 0.0);
                let jqq = Complex64::new(c, 0.0);
                // A <- J† A J, applied as column then row updates.
                for k in 0..n {
                    let akp = a.at(k, p);
                    let akq = a.at(k, q);
                    a.set(k, p, akp * jpp + akq * jqp);
                    a.set(k, q, akp * jpq + akq * jqq);
                }
                for k in 0..n {
                    let apk = a.at(p, k);
                    let aqk = a.at(q, k);
                    a.set(p, k, jpp.conj() * apk + jqp.conj() * aqk);
                    a.set(q, k, jpq.conj() * apk + jqq.conj() * aqk);
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    v.set(k, p, vkp * jpp + vkq * jqp);
                    v.set(k, q, vkp * jpq + vkq * jqq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.at(i, i).re).collect();
    order.sort_unstable_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, j| v.at(i, order[j]));

    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a.at(i, j).norm_sqr();
            }
        }
    }
    libm::sqrt(acc)
}

/// Square root of a PSD matrix.
///
/// Eigenvalues in `[PSD_CLAMP, 0)` are clamped to zero (round-off from
/// channel application must not poison fidelities); anything below
/// [`tol::PSD_CLAMP`] is rejected. Eigenvalues under [`tol::EIG_FLOOR`]
/// relative to the largest are floored to zero as well, so true zeros do
/// not resurface as `sqrt(round-off)`.
pub fn psd_sqrt(m: &Matrix) -> Result<Matrix> {
    let eig = hermitian_eig(m)?;
    let min = eig.min_eigenvalue();
    if min < tol::PSD_CLAMP {
        return Err(Error::NotPSD(min));
    }
    let floor = eig.max_eigenvalue() * tol::EIG_FLOOR;
    Ok(eig.map_eigenvalues(|l| if l > floor { libm::sqrt(l) } else { 0.0 }))
}

/// Kronecker product: `(A⊗B)[(i·rB+k), (j·cB+l)] = A[i,j]·B[k,l]`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca) = (a.rows(), a.cols());
    let (rb, cb) = (b.rows(), b.cols());
    Matrix::from_fn(ra * rb, ca * cb, |i, j| a.at(i / rb, j / cb) * b.at(i % rb, j % cb))
}

/// Frobenius pairing `Tr(A†B)`; real when both arguments are Hermitian.
pub fn frobenius_inner(a: &Matrix, b: &Matrix) -> Result<Complex64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(a.rows(), a.cols(), b.rows(), b.cols()));
    }
    Ok(a.entries().iter().zip(b.entries()).map(|(x, y)| x.conj() * y).sum())
}

/// Integer power by repeated multiplication (exact for exactly
/// representable bases, deterministic across platforms).
pub fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    let mut base = x;
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
