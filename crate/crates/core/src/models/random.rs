use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{ClosedLoop, Controller, InnovationModel};
use crate::error::{Error, Result};
use crate::linalg::{solve_discrete_riccati, spectral_radius};

/// Plant dimensions. The LQG controller carries a state estimate, so its
/// state dimension equals `n_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
}

/// Parameters of the random plant/controller ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    /// Open-loop spectral radius of `A` is `spectral_target · s` with
    /// `s ~ U(0.5, 1.5)`, so plants may be open-loop unstable.
    pub spectral_target: f64,
    pub max_attempts: usize,
    /// Required lower bound on `λ_min(Γ)`.
    pub gamma_floor: f64,
    /// Ridge added to random weights: `W = MMᵀ + εI`.
    pub weight_eps: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            spectral_target: 0.7,
            max_attempts: 100,
            gamma_floor: 1e-3,
            weight_eps: 0.1,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> DMatrix<f64> {
    let m = gaussian(rng, n, n);
    &m * m.transpose() + DMatrix::identity(n, n) * eps
}

/// One draw from the ensemble; `None` when the draw violates a contract and
/// should be retried.
fn draw(rng: &mut ChaCha8Rng, dims: SystemDims, cfg: &GeneratorConfig) -> Option<ClosedLoop> {
    let SystemDims { n_x, n_u, n_y } = dims;
    let eps = cfg.weight_eps;

    let mut a = gaussian(rng, n_x, n_x);
    let radius = spectral_radius(&a).ok()?;
    let scale: f64 = rng.sample(Uniform::new(0.5, 1.5).ok()?);
    if radius > 0.0 {
        a *= cfg.spectral_target * scale / radius;
    }
    let b = gaussian(rng, n_x, n_u);
    let c = gaussian(rng, n_y, n_x);

    // Innovation form of a plant with process noise W and measurement noise V:
    // K is the steady-state Kalman gain, Ψ the innovation covariance.
    let w = random_pd(rng, n_x, eps);
    let v = random_pd(rng, n_y, eps);
    let filt = solve_discrete_riccati(&a.transpose(), &c.transpose(), &w, &v).ok()?;
    let k = filt.gain.transpose();
    let psi = &c * &filt.p * c.transpose() + &v;

    // LQG: state feedback from a control Riccati, estimator gain from a filter
    // Riccati with independent random weights.
    let qc = random_pd(rng, n_x, eps);
    let rc = random_pd(rng, n_u, eps);
    let ctrl = solve_discrete_riccati(&a, &b, &qc, &rc).ok()?;
    let we = random_pd(rng, n_x, eps);
    let ve = random_pd(rng, n_y, eps);
    let est = solve_discrete_riccati(&a.transpose(), &c.transpose(), &we, &ve).ok()?;
    let l = est.gain.transpose();
    let d2f = random_pd(rng, n_u, eps);

    let f = &ctrl.gain;
    let controller = Controller::new(
        &a - &b * f - &l * &c,
        l,
        &b * &d2f,
        -f,
        DMatrix::zeros(n_u, n_y),
        d2f,
    )
    .ok()?;
    let plant = InnovationModel::new(a, b, c, k, crate::linalg::symmetrize(&psi)).ok()?;
    let cl = ClosedLoop::assemble(plant, controller).ok()?;
    (cl.xi() >= cfg.gamma_floor).then_some(cl)
}

/// Random plant in innovation form under random-weight LQG feedback with
/// excitation, retried until the loop is stable and `λ_min(Γ)` clears the
/// configured floor.
pub fn random_closed_loop(
    dims: SystemDims,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<ClosedLoop> {
    if dims.n_x == 0 || dims.n_u == 0 || dims.n_y == 0 {
        return Err(Error::InvalidArgument(format!(
            "dimensions must be positive, got {dims:?}"
        )));
    }
    if !(cfg.spectral_target > 0.0 && cfg.spectral_target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "spectral_target must lie in (0, 1), got {}",
            cfg.spectral_target
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.max_attempts {
        if let Some(cl) = draw(&mut rng, dims, cfg) {
            return Ok(cl);
        }
    }
    Err(Error::GenerationFailed {
        seed,
        attempts: cfg.max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_generation_is_deterministic() {
        let dims = SystemDims {
            n_x: 1,
            n_u: 1,
            n_y: 1,
        };
        let cfg = GeneratorConfig::default();
        let a = random_closed_loop(dims, &cfg, 3).unwrap();
        let b = random_closed_loop(dims, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.spectral_radius() < 1.0);
    }

    #[test]
    fn gamma_floor_respected() {
        let dims = SystemDims {
            n_x: 3,
            n_u: 1,
            n_y: 1,
        };
        let cfg = GeneratorConfig::default();
        let cl = random_closed_loop(dims, &cfg, 17).unwrap();
        assert!(cl.xi() >= cfg.gamma_floor);
    }

    #[test]
    fn batch_of_seeds_all_valid() {
        let dims = SystemDims {
            n_x: 3,
            n_u: 1,
            n_y: 1,
        };
        let cfg = GeneratorConfig::default();
        for seed in 0..100 {
            let cl = random_closed_loop(dims, &cfg, seed).unwrap();
            assert!(cl.spectral_radius() < 1.0, "seed {seed}");
            assert!(cl.xi() >= cfg.gamma_floor, "seed {seed}");
            let pred = spectral_radius(&cl.plant.predictor_matrix()).unwrap();
            assert!(pred < 1.0, "seed {seed}");
        }
    }

    #[test]
    fn impossible_floor_fails_with_seed() {
        let dims = SystemDims {
            n_x: 2,
            n_u: 1,
            n_y: 1,
        };
        let cfg = GeneratorConfig {
            gamma_floor: 1e9,
            max_attempts: 3,
            ..GeneratorConfig::default()
        };
        assert!(matches!(
            random_closed_loop(dims, &cfg, 8),
            Err(Error::GenerationFailed {
                seed: 8,
                attempts: 3
            })
        ));
    }

    #[test]
    fn zero_dims_rejected() {
        let dims = SystemDims {
            n_x: 0,
            n_u: 1,
            n_y: 1,
        };
        assert!(random_closed_loop(dims, &GeneratorConfig::default(), 0).is_err());
    }
}
