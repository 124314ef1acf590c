//! Dense linear-algebra and system-theoretic kernels.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. The functions are pure:
//! they allocate their outputs and never touch shared state.

mod balance;
mod hinf;
mod lyapunov;
mod riccati;
mod statespace;

pub use balance::{balanced_truncate, hankel_singular_values, BalancedReduction};
pub(crate) use hinf::{circle_peak, golden_max};
pub use hinf::{grid_peak_gain, hinf_norm, HINF_GRID_POINTS, HINF_TOL};
pub use lyapunov::{solve_discrete_lyapunov, LYAPUNOV_STABILITY_MARGIN};
pub use riccati::{solve_discrete_riccati, RiccatiSolution, RICCATI_MAX_ITER, RICCATI_TOL};
pub use statespace::{FrequencyResponse, StateSpace};

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::dims(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if !all_finite(a) {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    // Delay lines are exactly nilpotent; QR iteration either stalls on them or
    // returns eigenvalues of size ε^{1/n}.
    if is_nilpotent(a) {
        return Ok(vec![Complex64::new(0.0, 0.0); a.nrows()]);
    }
    if let Some(eigs) = schur_eigenvalues(a, 0.0) {
        return Ok(eigs);
    }
    let shift = 0.5 * (1.0 + a.norm());
    schur_eigenvalues(a, shift)
        .ok_or_else(|| Error::InvalidArgument("Schur decomposition did not converge".into()))
}

fn schur_eigenvalues(a: &DMatrix<f64>, shift: f64) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    let shifted = a + DMatrix::identity(n, n) * shift;
    let schur = Schur::try_new(shifted, f64::EPSILON, 100_000)?;
    Some(
        schur
            .complex_eigenvalues()
            .iter()
            .map(|c| Complex64::new(c.re - shift, c.im))
            .collect(),
    )
}

/// `Aⁿ = 0` by repeated squaring.
fn is_nilpotent(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let mut power = a.clone();
    let mut exp = 1;
    while exp < n {
        power = &power * &power;
        exp *= 2;
        if !all_finite(&power) {
            return false;
        }
    }
    power.iter().all(|&x| x == 0.0)
}

/// Largest eigenvalue modulus. Zero for an empty matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of the symmetric part of `m`.
fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

pub fn lambda_min_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn lambda_max_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym_eigen(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Symmetric PSD square root; negative eigenvalues from roundoff are clipped.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Factor `F` with `m = F Fᵀ` for a symmetric PSD `m` (eigenvector based, so it
/// tolerates singular inputs where Cholesky would fail).
pub(crate) fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Solves `X M = rhs` for symmetric positive-definite `M` by Cholesky.
pub fn solve_right_spd(rhs: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() || rhs.ncols() != m.nrows() {
        return Err(Error::dims(format!(
            "cannot solve X M = B with M {}x{} and B {}x{}",
            m.nrows(),
            m.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    let chol = symmetrize(m).cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite(format!("lambda_min = {:e}", lambda_min_sym(m)))
    })?;
    // X M = B  <=>  M Xᵀ = Bᵀ
    Ok(chol.solve(&rhs.transpose()).transpose())
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Horizontal concatenation; all blocks must share a row count.
pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Vertical concatenation; all blocks must share a column count.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}
