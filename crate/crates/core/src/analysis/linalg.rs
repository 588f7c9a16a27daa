//! Rank, kernels and subspace comparison on dense matrices.

use nalgebra::linalg::Schur;
use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

/// Relative rank tolerance used when none is given: machine epsilon, scaled
/// by `sigma_max * max(rows, cols)` at the call site.
pub const DEFAULT_RANK_TOL: f64 = f64::EPSILON;

struct Decomposition<T: ComplexField<RealField = f64>> {
    singular: Vec<f64>,
    /// `V^H` of a square SVD (full right basis).
    v_t: DMatrix<T>,
    threshold: f64,
}

fn decompose<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: Option<f64>) -> Decomposition<T> {
    let (rows, cols) = m.shape();
    // nalgebra computes a thin SVD, so pad wide matrices with zero rows to get
    // the full right-singular basis.
    let square = if rows < cols {
        let mut padded = DMatrix::<T>::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = square.svd(false, true);
    let singular: Vec<f64> = svd.singular_values.iter().copied().collect();
    let sigma_max = singular.iter().copied().fold(0.0, f64::max);
    let threshold = tol.unwrap_or(DEFAULT_RANK_TOL) * sigma_max * rows.max(cols) as f64;
    Decomposition {
        singular,
        v_t: svd.v_t.expect("requested V^T"),
        threshold,
    }
}

/// Number of singular values above `tol * sigma_max * max(rows, cols)`.
pub fn numeric_rank<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: Option<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let d = decompose(m, tol);
    d.singular.iter().filter(|&&s| s > d.threshold && s > 0.0).count()
}

/// Orthonormal basis of the numerical kernel, one vector per column.
pub fn kernel_basis<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: Option<f64>) -> DMatrix<T> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let d = decompose(m, tol);
    let picked: Vec<usize> = d
        .singular
        .iter()
        .enumerate()
        .filter(|(_, &s)| !(s > d.threshold && s > 0.0))
        .map(|(k, _)| k)
        .collect();
    let mut basis = DMatrix::<T>::zeros(cols, picked.len());
    for (c, &k) in picked.iter().enumerate() {
        basis.set_column(c, &d.v_t.row(k).adjoint());
    }
    basis
}

/// Largest column norm of `b - a a^H b`: how far the columns of `b` stick out
/// of the span of the orthonormal columns of `a`.
pub fn projection_residual<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    if b.ncols() == 0 {
        return 0.0;
    }
    let r = if a.ncols() == 0 {
        b.clone()
    } else {
        b - a * (a.adjoint() * b)
    };
    r.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Result of comparing two subspaces given by orthonormal bases.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpanComparison {
    pub dim_a: usize,
    pub dim_b: usize,
    /// `max(residual(a, b), residual(b, a))`.
    pub residual: f64,
}

impl SpanComparison {
    pub fn same_span(&self, tol: f64) -> bool {
        self.dim_a == self.dim_b && self.residual < tol
    }
}

pub fn compare_spans<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, b: &DMatrix<T>) -> SpanComparison {
    SpanComparison {
        dim_a: a.ncols(),
        dim_b: b.ncols(),
        residual: projection_residual(a, b).max(projection_residual(b, a)),
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

const SCHUR_MAX_ITERS: usize = 1000;
const SCHUR_RETRIES: usize = 16;

fn householder(k: usize, n: usize) -> DMatrix<f64> {
    let v = DVector::from_fn(n, |i, _| ((i + 1) as f64 * (k as f64 + 1.618)).sin() + 0.1);
    let v = &v / v.norm();
    DMatrix::identity(n, n) - (&v * v.transpose()) * 2.0
}

/// Eigenvalues of a square real matrix.
///
/// The shifted QR iteration occasionally stalls on small integer matrices;
/// when it does, the matrix is conjugated by a fixed Householder reflector
/// (which leaves the spectrum unchanged) and the iteration restarts. If every
/// attempt stalls the result is all NaN.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if m.amax() == 0.0 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITERS) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    for k in 0..SCHUR_RETRIES {
        let h = householder(k, n);
        if let Some(s) = Schur::try_new(&h * m * &h, f64::EPSILON, SCHUR_MAX_ITERS) {
            return s.complex_eigenvalues().iter().copied().collect();
        }
    }
    vec![Complex64::new(f64::NAN, f64::NAN); n]
}

/// `a ⊗ b`.
/// One line per row, comma-separated, full precision.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}
