//! Closed-form second moments of the closed-loop signal `z` and the optimal
//! predictors built from them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hstack, lambda_min_sym, solve_discrete_lyapunov, symmetrize, StateSpace};
use crate::models::{ClosedLoop, InnovationModel};
use crate::realization::{varx_to_predictor_ss, PredictorRealization};
use crate::varx::{solve_moments, LagLayout, VarxModel};

/// Autocovariances `r_0 … r_L` of `z` and the regression moments derived from them.
#[derive(Debug, Clone)]
pub struct MomentSet {
    /// `r[t] = E[z_t z_0ᵀ]`
    pub r: Vec<DMatrix<f64>>,
    /// `E[d_t d_tᵀ]`, block `(i, j)` equal to `r_{j−i}`.
    pub q: DMatrix<f64>,
    /// `E[y_t d_tᵀ]`
    pub n: DMatrix<f64>,
    pub p: usize,
    pub n_u: usize,
}

impl MomentSet {
    pub fn n_y(&self) -> usize {
        self.n.nrows()
    }

    /// `E‖y_t‖²`
    pub fn output_power(&self) -> f64 {
        let n_u = self.n_u;
        self.r[0].view((n_u, n_u), (self.n_y(), self.n_y())).trace()
    }

    /// Exact `E‖y_t − G d_t‖²` for any coefficient matrix `G` in the lag layout.
    pub fn prediction_mse(&self, g: &DMatrix<f64>) -> Result<f64> {
        if g.shape() != self.n.shape() {
            return Err(Error::dims(format!(
                "G is {}x{}, moments are {}x{}",
                g.nrows(),
                g.ncols(),
                self.n.nrows(),
                self.n.ncols()
            )));
        }
        let cross = (g * self.n.transpose()).trace();
        let quad = (g * &self.q * g.transpose()).trace();
        Ok(self.output_power() - 2.0 * cross + quad)
    }

    pub fn q_lambda_min(&self) -> f64 {
        lambda_min_sym(&self.q)
    }
}

/// `r_0 = C P Cᵀ + D Dᵀ`, `r_t = C A^{t−1}(A P Cᵀ + B Dᵀ)` for the white-noise
/// realization of the closed loop.
pub fn autocovariance(cl: &ClosedLoop, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let j = cl.build_j();
    let p = solve_discrete_lyapunov(&j.a, &(&j.b * j.b.transpose()))?;
    let mut r = Vec::with_capacity(max_lag + 1);
    r.push(symmetrize(
        &(&j.c * &p * j.c.transpose() + &j.d * j.d.transpose()),
    ));
    // s_t = A^{t−1}(A P Cᵀ + B Dᵀ)
    let mut s = &j.a * &p * j.c.transpose() + &j.b * j.d.transpose();
    for _ in 1..=max_lag {
        r.push(&j.c * &s);
        s = &j.a * s;
    }
    Ok(r)
}

/// Regression moments for VARX order `p`, in the same lag layout as
/// [`crate::varx::build_regressors`].
pub fn exact_moments(cl: &ClosedLoop, p: usize) -> Result<MomentSet> {
    if p == 0 {
        return Err(Error::InvalidArgument(
            "VARX order p must be positive".into(),
        ));
    }
    let r = autocovariance(cl, p)?;
    let (n_u, n_y, n_z) = (cl.n_u(), cl.n_y(), cl.n_z());
    let mut q = DMatrix::zeros(p * n_z, p * n_z);
    for i in 0..p {
        for j in 0..p {
            let block = if j >= i {
                r[j - i].clone()
            } else {
                r[i - j].transpose()
            };
            q.view_mut((i * n_z, j * n_z), (n_z, n_z)).copy_from(&block);
        }
    }
    let mut n = DMatrix::zeros(n_y, p * n_z);
    for j in 0..p {
        n.view_mut((0, j * n_z), (n_y, n_z))
            .copy_from(&r[j + 1].view((n_u, 0), (n_y, n_z)));
    }
    Ok(MomentSet {
        r,
        q: symmetrize(&q),
        n,
        p,
        n_u,
    })
}

/// `G_OPT = N Q⁻¹` and its delay-line predictor.
pub fn finite_horizon_kf(
    cl: &ClosedLoop,
    p: usize,
) -> Result<(DMatrix<f64>, PredictorRealization)> {
    let moments = exact_moments(cl, p)?;
    let g = optimal_coefficients(&moments, cl.xi())?;
    let model = VarxModel {
        g: g.clone(),
        p,
        alpha: 0.0,
        layout: LagLayout::NewestFirst,
    };
    let h = varx_to_predictor_ss(&model, cl.n_u(), cl.n_y())?;
    Ok((g, h))
}

/// `N Q⁻¹` from precomputed moments. `xi` is only used in the diagnostic when
/// `Q` fails to factor.
pub fn optimal_coefficients(moments: &MomentSet, xi: f64) -> Result<DMatrix<f64>> {
    solve_moments(&moments.q, &moments.n, 0.0).map_err(|e| match e {
        Error::NotPositiveDefinite(_) => Error::NotPositiveDefinite(format!(
            "exact Q: lambda_min(Q) = {:e}, lambda_min(Gamma) = {xi:e}",
            moments.q_lambda_min()
        )),
        other => other,
    })
}

fn predictor_radius(plant: &InnovationModel) -> Result<f64> {
    let radius = crate::linalg::spectral_radius(&plant.predictor_matrix())?;
    if radius >= 1.0 {
        return Err(Error::PredictorUnstable { radius });
    }
    Ok(radius)
}

/// `H* = [A − KC | B K; C | 0]`, whose impulse response is
/// `H_i = C (A − KC)^{i−1} [B K]`.
pub fn steady_state_kf(plant: &InnovationModel) -> Result<StateSpace> {
    predictor_radius(plant)?;
    Ok(StateSpace {
        a: plant.predictor_matrix(),
        b: hstack(&[&plant.b, &plant.k]),
        c: plant.c.clone(),
        d: DMatrix::zeros(plant.n_y(), plant.n_u() + plant.n_y()),
    })
}

/// Part of `H*` beyond lag `p`: `Σ_{i>p} H_i q^{−i}`, realized as
/// `[Ã | B K; C Ã^p | 0]`.
pub fn tail_system(plant: &InnovationModel, p: usize) -> Result<StateSpace> {
    let mut h = steady_state_kf(plant)?;
    let mut c = h.c.clone();
    for _ in 0..p {
        c = &c * &h.a;
    }
    h.c = c;
    Ok(h)
}
