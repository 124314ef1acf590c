use nalgebra::DMatrix;

use super::{all_finite, spectral_radius, symmetrize};
use crate::error::{Error, Result};

pub const RICCATI_MAX_ITER: usize = 10_000;
pub const RICCATI_TOL: f64 = 1e-12;

/// Stabilizing solution of the discrete algebraic Riccati equation and the
/// associated optimal gain.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// `P = AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q`
    pub p: DMatrix<f64>,
    /// `F = (R + BᵀPB)⁻¹BᵀPA`, so that `A − BF` is stable.
    pub gain: DMatrix<f64>,
    pub iterations: usize,
}

/// Solves the control DARE by the structure-preserving doubling algorithm.
///
/// With `G₀ = BR⁻¹Bᵀ`, `H₀ = Q`, `A₀ = A`, the recursion
/// `Aₖ₊₁ = Aₖ(I+GₖHₖ)⁻¹Aₖ`, `Gₖ₊₁ = Gₖ + Aₖ(I+GₖHₖ)⁻¹GₖAₖᵀ`,
/// `Hₖ₊₁ = Hₖ + AₖᵀHₖ(I+GₖHₖ)⁻¹Aₖ` drives `Hₖ` to the stabilizing solution
/// quadratically. The filter DARE is the same equation on `(Aᵀ, Cᵀ)`.
pub fn solve_discrete_riccati(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<RiccatiSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::dims(format!(
            "Riccati shapes: A {}x{}, B {}x{}, Q {}x{}, R {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    if [a, b, q, r].iter().any(|x| !all_finite(x)) {
        return Err(Error::InvalidArgument(
            "Riccati inputs must be finite".into(),
        ));
    }
    let r_chol = symmetrize(r)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("input cost R".into()))?;

    let mut ak = a.clone();
    let mut gk = b * r_chol.solve(&b.transpose());
    let mut hk = symmetrize(q);
    let eye = DMatrix::<f64>::identity(n, n);

    let mut converged = false;
    let mut iterations = 0;
    while iterations < RICCATI_MAX_ITER {
        iterations += 1;
        let lu = (&eye + &gk * &hk).lu();
        let xa = lu
            .solve(&ak)
            .ok_or_else(|| Error::NotStabilizable("singular doubling step".into()))?;
        let xg = lu
            .solve(&gk)
            .ok_or_else(|| Error::NotStabilizable("singular doubling step".into()))?;
        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &xa));
        let g_next = symmetrize(&(&gk + &ak * xg * ak.transpose()));
        let a_next = &ak * xa;
        if !all_finite(&h_next) {
            return Err(Error::NotStabilizable("doubling iterate diverged".into()));
        }
        let delta = (&h_next - &hk).norm();
        hk = h_next;
        gk = g_next;
        ak = a_next;
        if delta <= RICCATI_TOL * (1.0 + hk.norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotStabilizable(format!(
            "no convergence in {RICCATI_MAX_ITER} iterations"
        )));
    }

    let p = hk;
    let btp = b.transpose() * &p;
    let gain = symmetrize(&(r + &btp * b))
        .cholesky()
        .ok_or_else(|| Error::NotStabilizable("R + BᵀPB is not positive definite".into()))?
        .solve(&(&btp * a));
    let radius = spectral_radius(&(a - b * &gain))?;
    if radius >= 1.0 {
        return Err(Error::NotStabilizable(format!(
            "closed-loop spectral radius {radius}"
        )));
    }
    Ok(RiccatiSolution {
        p,
        gain,
        iterations,
    })
}
