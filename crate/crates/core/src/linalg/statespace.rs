use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{all_finite, block_diag, hstack, spectral_radius, vstack};
use crate::error::{Error, Result};

/// Discrete-time realization `x⁺ = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dims(format!(
                "A must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::dims(format!(
                "B has {} rows, A has {}",
                b.nrows(),
                n
            )));
        }
        if c.ncols() != n {
            return Err(Error::dims(format!(
                "C has {} columns, A has {}",
                c.ncols(),
                n
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::dims(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if !all_finite(m) {
                return Err(Error::InvalidArgument(format!(
                    "{name} has non-finite entries"
                )));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless system `y = D u`.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (q, m) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(q, 0),
            d,
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }

    /// Coefficient of `q^{-i}` in the transfer matrix: `D` for `i = 0`,
    /// `C A^{i-1} B` otherwise.
    pub fn markov_parameter(&self, i: usize) -> DMatrix<f64> {
        if i == 0 {
            return self.d.clone();
        }
        let mut m = self.b.clone();
        for _ in 1..i {
            m = &self.a * m;
        }
        &self.c * m
    }

    /// Change of state coordinates `x = T x̃`.
    pub fn similarity(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("similarity transform is singular".into()))?;
        Ok(Self {
            a: &t_inv * &self.a * t,
            b: &t_inv * &self.b,
            c: &self.c * t,
            d: self.d.clone(),
        })
    }

    /// Parallel interconnection `self - other` (shared input, subtracted outputs).
    pub fn difference(&self, other: &StateSpace) -> Result<Self> {
        if self.n_inputs() != other.n_inputs() || self.n_outputs() != other.n_outputs() {
            return Err(Error::dims(format!(
                "cannot subtract {}x{} system from {}x{} system",
                other.n_outputs(),
                other.n_inputs(),
                self.n_outputs(),
                self.n_inputs()
            )));
        }
        let neg_c = -&other.c;
        Ok(Self {
            a: block_diag(&[&self.a, &other.a]),
            b: vstack(&[&self.b, &other.b]),
            c: hstack(&[&self.c, &neg_c]),
            d: &self.d - &other.d,
        })
    }

    /// Frequency-response evaluator with complexified matrices cached.
    pub fn frequency_response(&self) -> FrequencyResponse {
        FrequencyResponse::new(self)
    }

    /// Transfer matrix at a single complex point.
    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        self.frequency_response().eval(z)
    }

    /// Runs the state recursion from zero initial state over the input rows.
    /// Row `t` of the result is the output at time `t`.
    pub fn simulate(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.ncols() != self.n_inputs() {
            return Err(Error::dims(format!(
                "input series has {} channels, system expects {}",
                inputs.ncols(),
                self.n_inputs()
            )));
        }
        let steps = inputs.nrows();
        let mut out = DMatrix::zeros(steps, self.n_outputs());
        let mut x = nalgebra::DVector::zeros(self.n_states());
        let mut next = x.clone();
        let mut y = nalgebra::DVector::zeros(self.n_outputs());
        for t in 0..steps {
            let u = inputs.row(t).transpose();
            y.gemv(1.0, &self.c, &x, 0.0);
            y.gemv(1.0, &self.d, &u, 1.0);
            out.row_mut(t).copy_from(&y.transpose());
            next.gemv(1.0, &self.a, &x, 0.0);
            next.gemv(1.0, &self.b, &u, 1.0);
            std::mem::swap(&mut x, &mut next);
        }
        Ok(out)
    }
}

/// Cached complex copies of a realization for repeated transfer-matrix
/// evaluation on frequency grids.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    a: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
    c: DMatrix<Complex64>,
    d: DMatrix<Complex64>,
}

impl FrequencyResponse {
    fn new(sys: &StateSpace) -> Self {
        let cx = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
        Self {
            a: cx(&sys.a),
            b: cx(&sys.b),
            c: cx(&sys.c),
            d: cx(&sys.d),
        }
    }

    /// `C (zI - A)⁻¹ B + D`. Returns non-finite entries when `z` is a pole.
    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        let n = self.a.nrows();
        if n == 0 {
            return self.d.clone();
        }
        let mut m = -self.a.clone();
        for i in 0..n {
            m[(i, i)] += z;
        }
        match m.lu().solve(&self.b) {
            Some(x) => &self.c * x + &self.d,
            None => DMatrix::from_element(
                self.d.nrows(),
                self.d.ncols(),
                Complex64::new(f64::INFINITY, f64::INFINITY),
            ),
        }
    }

    /// Largest singular value of the transfer matrix at `z`.
    pub fn gain(&self, z: Complex64) -> f64 {
        let g = self.eval(z);
        if g.nrows() == 0 || g.ncols() == 0 {
            return 0.0;
        }
        if g.nrows() == 1 || g.ncols() == 1 {
            return g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        }
        g.singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// Gain on the circle of radius `r` at angle `theta`.
    pub fn gain_on_circle(&self, r: f64, theta: f64) -> f64 {
        self.gain(Complex64::from_polar(r, theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_lag(a: f64) -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let err = StateSpace::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_nan() {
        let err = StateSpace::new(
            DMatrix::from_element(1, 1, f64::NAN),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
        );
        assert!(err.is_err());
    }

    #[test]
    fn markov_parameters_of_scalar_lag() {
        let sys = scalar_lag(0.5);
        assert_eq!(sys.markov_parameter(0)[(0, 0)], 0.0);
        assert_eq!(sys.markov_parameter(1)[(0, 0)], 1.0);
        assert_eq!(sys.markov_parameter(3)[(0, 0)], 0.25);
    }

    #[test]
    fn eval_matches_closed_form() {
        let sys = scalar_lag(0.5);
        let z = Complex64::new(0.3, 0.8);
        let got = sys.eval(z)[(0, 0)];
        let want = 1.0 / (z - 0.5);
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn difference_of_identical_systems_vanishes() {
        let sys = scalar_lag(0.3);
        let diff = sys.difference(&sys).unwrap();
        let z = Complex64::from_polar(1.0, 0.7);
        assert!(diff.eval(z)[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn simulate_matches_impulse_response() {
        let sys = scalar_lag(0.5);
        let mut u = DMatrix::zeros(5, 1);
        u[(0, 0)] = 1.0;
        let y = sys.simulate(&u).unwrap();
        for t in 0..5 {
            assert_eq!(y[(t, 0)], sys.markov_parameter(t)[(0, 0)]);
        }
    }
}
