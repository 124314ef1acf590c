//! Ridge-regularized VARX regression of `y_t` on the lag vector `d_t`.
//!
//! The lag vector is stacked newest first, `d_t = (z_{t−1}, z_{t−2}, …, z_{t−p})`,
//! with `z_t = (u_t, y_t)`. The realization module uses the same layout for its
//! delay line, tagged by [`LagLayout`].

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{solve_right_spd, symmetrize};
use crate::models::Trajectory;

/// Block order of the lag vector. Only one layout exists; the tag travels with
/// fitted models so that consumers can assert agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagLayout {
    NewestFirst,
}

/// A `z` series with `p` leading samples of context, giving `T = len − p`
/// regression rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    z: DMatrix<f64>,
    n_u: usize,
    p: usize,
}

impl Dataset {
    pub fn new(z: DMatrix<f64>, n_u: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument(
                "VARX order p must be positive".into(),
            ));
        }
        if n_u >= z.ncols() {
            return Err(Error::dims(format!(
                "z has {} columns, which leaves no outputs after {n_u} inputs",
                z.ncols()
            )));
        }
        if z.nrows() < p + 1 {
            return Err(Error::InsufficientData {
                needed: p + 1,
                got: z.nrows(),
            });
        }
        Ok(Self { z, n_u, p })
    }

    pub fn from_trajectory(traj: &Trajectory, p: usize) -> Result<Self> {
        Self::new(traj.z(), traj.u.ncols(), p)
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.z.ncols() - self.n_u
    }

    pub fn n_z(&self) -> usize {
        self.z.ncols()
    }

    /// Number of usable regression rows `T`.
    pub fn t_count(&self) -> usize {
        self.z.nrows() - self.p
    }

    /// Same samples viewed with a different VARX order.
    pub fn with_order(&self, p: usize) -> Result<Self> {
        Self::new(self.z.clone(), self.n_u, p)
    }

    /// Leading `t + p` samples, i.e. the first `t` regression rows.
    pub fn prefix(&self, t: usize) -> Result<Self> {
        let rows = t + self.p;
        if rows > self.z.nrows() {
            return Err(Error::InsufficientData {
                needed: rows,
                got: self.z.nrows(),
            });
        }
        Self::new(self.z.rows(0, rows).into_owned(), self.n_u, self.p)
    }

    /// Writes the series as CSV with a `u1,…,y1,…` header. Values use the
    /// shortest decimal representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.n_u)
            .map(|i| format!("u{i}"))
            .chain((1..=self.n_y()).map(|i| format!("y{i}")))
            .collect();
        w.write_record(&header)?;
        for row in self.z.row_iter() {
            w.write_record(row.iter().map(|x| format!("{x:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a series written by [`Dataset::write_csv`]. Input columns must
    /// precede output columns.
    pub fn read_csv<R: Read>(reader: R, p: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let mut n_u = 0;
        let mut seen_y = false;
        for (i, name) in header.iter().enumerate() {
            match name.trim().chars().next() {
                Some('u') if !seen_y => n_u += 1,
                Some('y') => seen_y = true,
                _ => {
                    return Err(Error::Schema {
                        line: 1,
                        message: format!(
                            "column {} ('{name}') must be a u-channel followed by y-channels",
                            i + 1
                        ),
                    })
                }
            }
        }
        if !seen_y {
            return Err(Error::Schema {
                line: 1,
                message: "no y columns".into(),
            });
        }
        let n_z = header.len();
        let mut values = Vec::new();
        let mut rows = 0;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != n_z {
                return Err(Error::Schema {
                    line,
                    message: format!("expected {n_z} fields, found {}", rec.len()),
                });
            }
            for field in rec.iter() {
                let x: f64 = field.trim().parse().map_err(|_| Error::Schema {
                    line,
                    message: format!("'{field}' is not a number"),
                })?;
                values.push(x);
            }
            rows += 1;
        }
        Self::new(DMatrix::from_row_slice(rows, n_z, &values), n_u, p)
    }

    pub fn load_csv(path: impl AsRef<Path>, p: usize) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, p)
    }
}

/// Fitted VARX coefficients: `ŷ_t = G d_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarxModel {
    /// `n_y × (p·n_z)`
    pub g: DMatrix<f64>,
    pub p: usize,
    pub alpha: f64,
    pub layout: LagLayout,
}

impl VarxModel {
    pub fn n_y(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_z(&self) -> usize {
        self.g.ncols() / self.p
    }

    /// Coefficient block multiplying `z_{t−lag}`, for `lag = 1..=p`.
    pub fn lag_block(&self, lag: usize) -> DMatrix<f64> {
        assert!(
            (1..=self.p).contains(&lag),
            "lag {lag} outside 1..={}",
            self.p
        );
        let n_z = self.n_z();
        self.g.columns((lag - 1) * n_z, n_z).into_owned()
    }
}

/// Regressor matrix `D` (row `t` is `d_tᵀ`) and target matrix `Y` (row `t` is `y_tᵀ`).
pub fn build_regressors(ds: &Dataset) -> (DMatrix<f64>, DMatrix<f64>) {
    let (p, n_z, n_u, n_y) = (ds.p, ds.n_z(), ds.n_u, ds.n_y());
    let t_count = ds.t_count();
    let mut d = DMatrix::zeros(t_count, p * n_z);
    let mut y = DMatrix::zeros(t_count, n_y);
    for t in 0..t_count {
        let now = t + p;
        for lag in 1..=p {
            let src = ds.z.row(now - lag);
            d.view_mut((t, (lag - 1) * n_z), (1, n_z)).copy_from(&src);
        }
        y.row_mut(t).copy_from(&ds.z.view((now, n_u), (1, n_y)));
    }
    (d, y)
}

/// `Q_T = DᵀD / T` and `N_T = YᵀD / T`.
pub fn empirical_moments(
    d: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if d.nrows() != y.nrows() {
        return Err(Error::dims(format!(
            "regressors have {} rows, targets {}",
            d.nrows(),
            y.nrows()
        )));
    }
    let t = d.nrows();
    if t == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let scale = 1.0 / t as f64;
    let q = symmetrize(&(d.transpose() * d)) * scale;
    let n = y.transpose() * d * scale;
    Ok((q, n))
}

/// `G = N (Q + ridge·I)⁻¹` by Cholesky. `ridge = α/T` for the regularized
/// least-squares problem; `ridge = 0` with exact moments gives the optimal
/// finite-horizon predictor.
pub fn solve_moments(q: &DMatrix<f64>, n: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    let dim = q.nrows();
    let lhs = q + DMatrix::identity(dim, dim) * ridge;
    solve_right_spd(n, &lhs)
}

/// Solves `argmin_G Σ_t ‖y_t − G d_t‖² + α‖G‖²_F`.
pub fn fit_varx(ds: &Dataset, alpha: f64) -> Result<VarxModel> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let (d, y) = build_regressors(ds);
    let (q, n) = empirical_moments(&d, &y)?;
    let g = solve_moments(&q, &n, alpha / ds.t_count() as f64)?;
    Ok(VarxModel {
        g,
        p: ds.p,
        alpha,
        layout: LagLayout::NewestFirst,
    })
}

/// One-step predictions `ŷ_t = G d_t` and their mean squared error.
pub fn predict_varx(m: &VarxModel, ds: &Dataset) -> Result<(DMatrix<f64>, f64)> {
    if m.p != ds.p {
        return Err(Error::OrderMismatch {
            model: m.p,
            data: ds.p,
        });
    }
    if m.g.ncols() != ds.p * ds.n_z() || m.g.nrows() != ds.n_y() {
        return Err(Error::dims(format!(
            "G is {}x{}, dataset needs {}x{}",
            m.g.nrows(),
            m.g.ncols(),
            ds.n_y(),
            ds.p * ds.n_z()
        )));
    }
    let (d, y) = build_regressors(ds);
    let yhat = d * m.g.transpose();
    let mse = (&y - &yhat).norm_squared() / y.nrows() as f64;
    Ok((yhat, mse))
}
