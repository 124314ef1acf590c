use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ClosedLoop;
use crate::error::{Error, Result};
use crate::linalg::hstack;

/// Closed-loop signals, one row per retained time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `z_t = (u_t, y_t)` stacked row-wise.
    pub fn z(&self) -> DMatrix<f64> {
        hstack(&[&self.u, &self.y])
    }
}

/// Simulates `burn_in + t_total` steps from zero initial state and keeps the
/// last `t_total`.
///
/// Noise is drawn from a ChaCha8 stream seeded with `seed`; each step draws
/// `n_y` standard normals for the innovation (coloured by the Cholesky factor
/// of Ψ) followed by `n_u` for the excitation `v`. The draw order is part of
/// the contract: the same seed always replays the same trajectory.
pub fn simulate(cl: &ClosedLoop, t_total: usize, burn_in: usize, seed: u64) -> Result<Trajectory> {
    if t_total == 0 {
        return Err(Error::InvalidArgument("t_total must be at least 1".into()));
    }
    let (n_u, n_y) = (cl.n_u(), cl.n_y());
    let psi_chol = cl
        .plant
        .psi
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Psi".into()))?
        .l();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = DVector::zeros(cl.n_states());
    let mut next = state.clone();
    let mut white = DVector::zeros(n_y);
    let mut w = DVector::zeros(n_y + n_u);
    let mut z = DVector::zeros(n_u + n_y);

    let mut traj = Trajectory {
        u: DMatrix::zeros(t_total, n_u),
        y: DMatrix::zeros(t_total, n_y),
        e: DMatrix::zeros(t_total, n_y),
        v: DMatrix::zeros(t_total, n_u),
        seed,
    };
    for step in 0..burn_in + t_total {
        for i in 0..n_y {
            white[i] = StandardNormal.sample(&mut rng);
        }
        let mut e = w.rows_mut(0, n_y);
        e.gemv(1.0, &psi_chol, &white, 0.0);
        for i in 0..n_u {
            w[n_y + i] = StandardNormal.sample(&mut rng);
        }
        z.gemv(1.0, &cl.state_to_z, &state, 0.0);
        z.gemv(1.0, &cl.noise_to_z, &w, 1.0);
        next.gemv(1.0, &cl.acl, &state, 0.0);
        next.gemv(1.0, &cl.noise_to_state, &w, 1.0);
        std::mem::swap(&mut state, &mut next);

        if step >= burn_in {
            let t = step - burn_in;
            for i in 0..n_u {
                traj.u[(t, i)] = z[i];
                traj.v[(t, i)] = w[n_y + i];
            }
            for i in 0..n_y {
                traj.y[(t, i)] = z[n_u + i];
                traj.e[(t, i)] = w[i];
            }
        }
    }
    Ok(traj)
}
