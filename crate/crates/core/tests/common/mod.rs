#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use redar::linalg::{spectral_radius, StateSpace};
use redar::models::{random_closed_loop, ClosedLoop, GeneratorConfig, SystemDims};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random `A` rescaled to the given spectral radius.
pub fn stable_matrix(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DMatrix<f64> {
    let a = gaussian(rng, n, n);
    let r = spectral_radius(&a).unwrap();
    if r == 0.0 {
        a
    } else {
        a * (radius / r)
    }
}

pub fn stable_system(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    p: usize,
    radius: f64,
) -> StateSpace {
    let a = stable_matrix(rng, n, radius);
    StateSpace::new(
        a,
        gaussian(rng, n, m),
        gaussian(rng, p, n),
        gaussian(rng, p, m),
    )
    .unwrap()
}

pub fn siso_loop(seed: u64, n_x: usize) -> ClosedLoop {
    random_closed_loop(
        SystemDims {
            n_x,
            n_u: 1,
            n_y: 1,
        },
        &GeneratorConfig::default(),
        seed,
    )
    .unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample lag-`k` covariance `(1/N) Σ z_{t+k} z_tᵀ` of the rows of `z`.
pub fn sample_autocovariance(z: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = z.nrows() - k;
    let lead = z.rows(k, n);
    let lag = z.rows(0, n);
    lead.transpose() * lag / n as f64
}
