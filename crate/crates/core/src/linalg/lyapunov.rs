use nalgebra::DMatrix;

use super::{all_finite, spectral_radius, symmetrize};
use crate::error::{Error, Result};

/// Inputs with spectral radius at or above `1 - LYAPUNOV_STABILITY_MARGIN` are
/// rejected as unstable.
pub const LYAPUNOV_STABILITY_MARGIN: f64 = 1e-9;

const MAX_DOUBLINGS: usize = 80;
const REFINEMENT_STEPS: usize = 2;

/// Solves `P = A P Aᵀ + W` for stable `A` and symmetric `W`.
///
/// Uses Smith's doubling iteration, `P ← P + Aₖ P Aₖᵀ`, `Aₖ ← Aₖ²`, which sums
/// the series `Σ Aᵏ W (Aᵀ)ᵏ` in logarithmically many steps, followed by
/// residual correction.
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || w.shape() != (n, n) {
        return Err(Error::dims(format!(
            "Lyapunov needs square A and W of equal size, got A {}x{} and W {}x{}",
            a.nrows(),
            a.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if !all_finite(a) || !all_finite(w) {
        return Err(Error::InvalidArgument(
            "Lyapunov inputs must be finite".into(),
        ));
    }
    let radius = spectral_radius(a)?;
    if radius >= 1.0 - LYAPUNOV_STABILITY_MARGIN {
        return Err(Error::NotStable { radius });
    }

    let w = symmetrize(w);
    let mut p = doubling_sum(a, &w);
    for _ in 0..REFINEMENT_STEPS {
        let residual = &w - (&p - a * &p * a.transpose());
        if residual.norm() <= f64::EPSILON * (1.0 + p.norm()) {
            break;
        }
        p += doubling_sum(a, &symmetrize(&residual));
    }
    Ok(symmetrize(&p))
}

fn doubling_sum(a: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = w.clone();
    let mut ak = a.clone();
    for _ in 0..MAX_DOUBLINGS {
        let inc = &ak * &p * ak.transpose();
        let inc_norm = inc.norm();
        p += inc;
        if inc_norm <= f64::EPSILON * 1e-3 * p.norm() {
            break;
        }
        ak = &ak * &ak;
        if ak.norm() == 0.0 {
            break;
        }
    }
    p
}
