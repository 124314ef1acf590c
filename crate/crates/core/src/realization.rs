//! Predictor realizations of fitted VARX models, their balanced reduction and
//! the innovation-form model read off the reduced predictor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{balanced_truncate, hstack, StateSpace};
use crate::varx::{LagLayout, VarxModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    /// Delay-line realization of the VARX predictor.
    Full,
    /// Balanced truncation of a full predictor.
    Reduced,
}

/// Strictly causal map from `z_t = (u_t, y_t)` to `ŷ_t`.
#[derive(Debug, Clone)]
pub struct PredictorRealization {
    pub ss: StateSpace,
    pub kind: PredictorKind,
    /// Certified `‖H^A − H^R‖∞` bound for reduced predictors, zero for full ones.
    pub certified_error: f64,
}

/// Innovation-form estimates `(Â, B̂, Ĉ, D̂, K̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedModel {
    pub ahat: DMatrix<f64>,
    pub bhat: DMatrix<f64>,
    pub chat: DMatrix<f64>,
    pub dhat: DMatrix<f64>,
    pub khat: DMatrix<f64>,
}

impl IdentifiedModel {
    pub fn new(
        ahat: DMatrix<f64>,
        bhat: DMatrix<f64>,
        chat: DMatrix<f64>,
        dhat: DMatrix<f64>,
        khat: DMatrix<f64>,
    ) -> Result<Self> {
        let n = ahat.nrows();
        let (n_u, n_y) = (bhat.ncols(), chat.nrows());
        if !ahat.is_square()
            || bhat.nrows() != n
            || chat.ncols() != n
            || dhat.shape() != (n_y, n_u)
            || khat.shape() != (n, n_y)
        {
            return Err(Error::dims(format!(
                "identified model: A {}x{}, B {}x{}, C {}x{}, D {}x{}, K {}x{}",
                ahat.nrows(),
                ahat.ncols(),
                bhat.nrows(),
                bhat.ncols(),
                chat.nrows(),
                chat.ncols(),
                dhat.nrows(),
                dhat.ncols(),
                khat.nrows(),
                khat.ncols()
            )));
        }
        Ok(Self {
            ahat,
            bhat,
            chat,
            dhat,
            khat,
        })
    }

    pub fn order(&self) -> usize {
        self.ahat.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.bhat.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.chat.nrows()
    }

    /// `[Â − K̂Ĉ | B̂ K̂; Ĉ | 0]`, driven by `(u, y)`.
    pub fn predictor(&self) -> StateSpace {
        StateSpace {
            a: &self.ahat - &self.khat * &self.chat,
            b: hstack(&[&self.bhat, &self.khat]),
            c: self.chat.clone(),
            d: DMatrix::zeros(self.n_y(), self.n_u() + self.n_y()),
        }
    }
}

/// Delay-line realization: the state holds `(z_{t−1}, …, z_{t−p})` newest
/// first, `A` shifts every block down one slot, `B` writes `z_t` into the top
/// slot and `C = G`.
pub fn varx_to_predictor_ss(m: &VarxModel, n_u: usize, n_y: usize) -> Result<PredictorRealization> {
    let LagLayout::NewestFirst = m.layout;
    let n_z = n_u + n_y;
    if m.p == 0 || m.g.shape() != (n_y, m.p * n_z) {
        return Err(Error::dims(format!(
            "G is {}x{}, expected {}x{} for p = {}",
            m.g.nrows(),
            m.g.ncols(),
            n_y,
            m.p * n_z,
            m.p
        )));
    }
    let n = m.p * n_z;
    let mut a = DMatrix::zeros(n, n);
    for i in n_z..n {
        a[(i, i - n_z)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, n_z);
    for i in 0..n_z {
        b[(i, i)] = 1.0;
    }
    let ss = StateSpace::new(a, b, m.g.clone(), DMatrix::zeros(n_y, n_z))?;
    Ok(PredictorRealization {
        ss,
        kind: PredictorKind::Full,
        certified_error: 0.0,
    })
}

/// Balanced truncation of `h_a` to the smallest order whose certified error
/// stays within `phi`.
pub fn reduce_predictor(h_a: &PredictorRealization, phi: f64) -> Result<PredictorRealization> {
    if !(phi > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reduction budget must be positive, got {phi}"
        )));
    }
    let red = balanced_truncate(&h_a.ss, phi)?;
    Ok(PredictorRealization {
        ss: red.reduced,
        kind: PredictorKind::Reduced,
        certified_error: h_a.certified_error + red.certified_error,
    })
}

/// Splits `H^R = [A_r | B_r; C_r | 0]` into innovation form with
/// `B̂ | K̂ = B_r`, `Ĉ = C_r`, `D̂ = 0` and `Â = A_r + K̂Ĉ`.
pub fn extract_innovation_form(
    h_r: &PredictorRealization,
    n_u: usize,
    n_y: usize,
) -> Result<IdentifiedModel> {
    let ss = &h_r.ss;
    if ss.n_inputs() != n_u + n_y || ss.n_outputs() != n_y {
        return Err(Error::dims(format!(
            "predictor maps {} inputs to {} outputs, expected {} to {n_y}",
            ss.n_inputs(),
            ss.n_outputs(),
            n_u + n_y
        )));
    }
    let bhat = ss.b.columns(0, n_u).into_owned();
    let khat = ss.b.columns(n_u, n_y).into_owned();
    let chat = ss.c.clone();
    let ahat = &ss.a + &khat * &chat;
    IdentifiedModel::new(ahat, bhat, chat, DMatrix::zeros(n_y, n_u), khat)
}

/// One-step-ahead predictions from zero initial state. Row `t` of the result
/// depends only on rows `< t` of `u` and `y`.
pub fn predict_with_model(
    model: &IdentifiedModel,
    u: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if u.ncols() != model.n_u() || y.ncols() != model.n_y() || u.nrows() != y.nrows() {
        return Err(Error::dims(format!(
            "series u {}x{}, y {}x{} do not fit a model with {} inputs and {} outputs",
            u.nrows(),
            u.ncols(),
            y.nrows(),
            y.ncols(),
            model.n_u(),
            model.n_y()
        )));
    }
    model.predictor().simulate(&hstack(&[u, y]))
}
