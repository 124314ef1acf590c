//! Plant, controller and their closed-loop interconnection.
//!
//! The plant is an innovation-form model
//!
//! ```text
//! x⁺ = A x + B u + K e        y = C x + e,       e ~ N(0, Ψ)
//! ```
//!
//! and the controller a linear feedback with excitation noise
//!
//! ```text
//! s⁺ = A_F s + B1_F y + B2_F v    u = C_F s + D1_F y + D2_F v,   v ~ N(0, I)
//! ```
//!
//! Within one time step `y` is resolved first (the plant is strictly proper in
//! `u`) and `u` second.

mod random;
mod simulate;

pub use random::{random_closed_loop, GeneratorConfig, SystemDims};
pub use simulate::{simulate, Trajectory};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    all_finite, block_diag, hstack, lambda_min_sym, solve_discrete_lyapunov, spectral_radius,
    sym_sqrt, symmetrize, vstack, StateSpace,
};

/// Smallest eigenvalue of the joint noise covariance accepted as positive definite.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct InnovationModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub psi: DMatrix<f64>,
}

impl InnovationModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        k: DMatrix<f64>,
        psi: DMatrix<f64>,
    ) -> Result<Self> {
        let n_x = a.nrows();
        let n_y = c.nrows();
        let n_u = b.ncols();
        let shapes = [
            ("A", &a, (n_x, n_x)),
            ("B", &b, (n_x, n_u)),
            ("C", &c, (n_y, n_x)),
            ("K", &k, (n_x, n_y)),
            ("Psi", &psi, (n_y, n_y)),
        ];
        for (name, m, want) in shapes {
            if m.shape() != want {
                return Err(Error::dims(format!(
                    "plant {name} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    want.0,
                    want.1
                )));
            }
            if !all_finite(m) {
                return Err(Error::InvalidArgument(format!(
                    "plant {name} has non-finite entries"
                )));
            }
        }
        if (&psi - psi.transpose()).norm() > 1e-12 * (1.0 + psi.norm()) {
            return Err(Error::InvalidArgument("Psi must be symmetric".into()));
        }
        let psi = symmetrize(&psi);
        let lmin = lambda_min_sym(&psi);
        if !(lmin > NOISE_FLOOR) {
            return Err(Error::DegenerateNoise { lambda_min: lmin });
        }
        Ok(Self { a, b, c, k, psi })
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// `A − KC`, the state matrix of the steady-state predictor.
    pub fn predictor_matrix(&self) -> DMatrix<f64> {
        &self.a - &self.k * &self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub af: DMatrix<f64>,
    pub b1f: DMatrix<f64>,
    pub b2f: DMatrix<f64>,
    pub cf: DMatrix<f64>,
    pub d1f: DMatrix<f64>,
    pub d2f: DMatrix<f64>,
}

impl Controller {
    pub fn new(
        af: DMatrix<f64>,
        b1f: DMatrix<f64>,
        b2f: DMatrix<f64>,
        cf: DMatrix<f64>,
        d1f: DMatrix<f64>,
        d2f: DMatrix<f64>,
    ) -> Result<Self> {
        let n_s = af.nrows();
        let n_y = b1f.ncols();
        let n_u = d2f.nrows();
        let shapes = [
            ("AF", &af, (n_s, n_s)),
            ("B1F", &b1f, (n_s, n_y)),
            ("B2F", &b2f, (n_s, n_u)),
            ("CF", &cf, (n_u, n_s)),
            ("D1F", &d1f, (n_u, n_y)),
            ("D2F", &d2f, (n_u, n_u)),
        ];
        for (name, m, want) in shapes {
            if m.shape() != want {
                return Err(Error::dims(format!(
                    "controller {name} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    want.0,
                    want.1
                )));
            }
            if !all_finite(m) {
                return Err(Error::InvalidArgument(format!(
                    "controller {name} has non-finite entries"
                )));
            }
        }
        Ok(Self {
            af,
            b1f,
            b2f,
            cf,
            d1f,
            d2f,
        })
    }

    pub fn n_s(&self) -> usize {
        self.af.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.d2f.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.b1f.ncols()
    }
}

/// Stationary signal powers `‖z‖²_P` and `‖e‖²_P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPowers {
    pub z_power_sq: f64,
    pub e_power_sq: f64,
}

impl SignalPowers {
    pub fn z_power(&self) -> f64 {
        self.z_power_sq.sqrt()
    }
}

/// Plant and controller in feedback, with the interconnection resolved into a
/// single recursion over `ξ = (x, s)` driven by `w = (e, v)`:
///
/// ```text
/// ξ⁺ = A_cl ξ + B_w w        z = (u, y) = C_z ξ + D_z w
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub plant: InnovationModel,
    pub controller: Controller,
    pub acl: DMatrix<f64>,
    pub noise_to_state: DMatrix<f64>,
    pub state_to_z: DMatrix<f64>,
    pub noise_to_z: DMatrix<f64>,
    spectral_radius: f64,
    gamma: DMatrix<f64>,
}

impl ClosedLoop {
    pub fn assemble(plant: InnovationModel, controller: Controller) -> Result<Self> {
        if controller.n_y() != plant.n_y() || controller.n_u() != plant.n_u() {
            return Err(Error::dims(format!(
                "controller maps {} outputs to {} inputs, plant has n_y = {}, n_u = {}",
                controller.n_y(),
                controller.n_u(),
                plant.n_y(),
                plant.n_u()
            )));
        }
        let (p, f) = (&plant, &controller);
        let n_y = p.n_y();
        let n_x = p.n_x();
        let n_s = f.n_s();

        let acl = vstack(&[
            &hstack(&[&(&p.a + &p.b * &f.d1f * &p.c), &(&p.b * &f.cf)]),
            &hstack(&[&(&f.b1f * &p.c), &f.af]),
        ]);
        let noise_to_state = vstack(&[
            &hstack(&[&(&p.k + &p.b * &f.d1f), &(&p.b * &f.d2f)]),
            &hstack(&[&f.b1f, &f.b2f]),
        ]);
        let state_to_z = vstack(&[
            &hstack(&[&(&f.d1f * &p.c), &f.cf]),
            &hstack(&[&p.c, &DMatrix::zeros(n_y, n_s)]),
        ]);
        let noise_to_z = vstack(&[
            &hstack(&[&f.d1f, &f.d2f]),
            &hstack(&[&DMatrix::identity(n_y, n_y), &DMatrix::zeros(n_y, f.n_u())]),
        ]);
        debug_assert_eq!(acl.nrows(), n_x + n_s);

        let radius = spectral_radius(&acl)?;
        if radius >= 1.0 {
            return Err(Error::Unstable { radius });
        }
        let omega = &f.d2f * f.d2f.transpose();
        let gamma = block_diag(&[&p.psi, &omega]);
        let lmin = lambda_min_sym(&gamma);
        if !(lmin > NOISE_FLOOR) {
            return Err(Error::DegenerateNoise { lambda_min: lmin });
        }
        Ok(Self {
            plant,
            controller,
            acl,
            noise_to_state,
            state_to_z,
            noise_to_z,
            spectral_radius: radius,
            gamma,
        })
    }

    pub fn n_u(&self) -> usize {
        self.plant.n_u()
    }

    pub fn n_y(&self) -> usize {
        self.plant.n_y()
    }

    pub fn n_z(&self) -> usize {
        self.n_u() + self.n_y()
    }

    pub fn n_states(&self) -> usize {
        self.acl.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// `Γ = blockdiag(Ψ, D2_F D2_Fᵀ)`, the covariance of `(e, D2_F v)`.
    pub fn noise_covariance(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// `ξ = λ_min(Γ)`.
    pub fn xi(&self) -> f64 {
        lambda_min_sym(&self.gamma)
    }

    /// Samples to discard so that the zero initial state has decayed:
    /// `10 / (1 − spectral radius)`, rounded up.
    pub fn default_burn_in(&self) -> usize {
        (10.0 / (1.0 - self.spectral_radius)).ceil() as usize
    }

    /// The operator `J` from normalized noise `(Ψ^{-1/2} e, v)` to `z = (u, y)`.
    pub fn build_j(&self) -> StateSpace {
        let scale = block_diag(&[
            &sym_sqrt(&self.plant.psi),
            &DMatrix::identity(self.n_u(), self.n_u()),
        ]);
        StateSpace {
            a: self.acl.clone(),
            b: &self.noise_to_state * &scale,
            c: self.state_to_z.clone(),
            d: &self.noise_to_z * &scale,
        }
    }

    /// Stationary state covariance of `ξ`.
    pub fn state_covariance(&self) -> Result<DMatrix<f64>> {
        let j = self.build_j();
        solve_discrete_lyapunov(&j.a, &(&j.b * j.b.transpose()))
    }

    pub fn signal_powers(&self) -> Result<SignalPowers> {
        let j = self.build_j();
        let p = self.state_covariance()?;
        let r0 = &j.c * p * j.c.transpose() + &j.d * j.d.transpose();
        Ok(SignalPowers {
            z_power_sq: r0.trace(),
            e_power_sq: self.plant.psi.trace(),
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    /// All dynamics zero: z = (v, e).
    pub(crate) fn static_loop() -> ClosedLoop {
        let plant = InnovationModel::new(
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(1.0),
        )
        .unwrap();
        let ctrl = Controller::new(
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(1.0),
        )
        .unwrap();
        ClosedLoop::assemble(plant, ctrl).unwrap()
    }

    /// Scalar plant with a static output feedback `u = −f y + v`.
    pub(crate) fn scalar_feedback(a: f64, b: f64, c: f64, k: f64, f: f64) -> ClosedLoop {
        let plant =
            InnovationModel::new(scalar(a), scalar(b), scalar(c), scalar(k), scalar(1.0)).unwrap();
        let ctrl = Controller::new(
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(-f),
            scalar(1.0),
        )
        .unwrap();
        ClosedLoop::assemble(plant, ctrl).unwrap()
    }

    #[test]
    fn static_loop_routes_noise() {
        let cl = static_loop();
        assert_eq!(cl.spectral_radius(), 0.0);
        // z = (u, y) = (v, e): rows of D_z pick v then e.
        assert_eq!(
            cl.noise_to_z,
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        );
    }

    #[test]
    fn static_loop_powers() {
        let powers = static_loop().signal_powers().unwrap();
        assert!((powers.z_power_sq - 2.0).abs() < 1e-14);
        assert_eq!(powers.e_power_sq, 1.0);
    }

    #[test]
    fn static_j_is_constant_gain() {
        let j = static_loop().build_j();
        let hinf = crate::linalg::hinf_norm(&j, 1e-9).unwrap();
        let gain = crate::linalg::spectral_norm(&j.d);
        assert!(hinf >= gain - 1e-12 && hinf <= gain * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn scalar_output_variance_closed_form() {
        // u = -f y + v, so x⁺ = (a - b f c) x + (k - b f) e + b v and
        // var(x) = ((k - b f)² + b²) / (1 - (a - b f c)²).
        let (a, b, c, k, f) = (0.9, 1.0, 1.0, 0.5, 0.4);
        let cl = scalar_feedback(a, b, c, k, f);
        let pole = a - b * f * c;
        let var_x = ((k - b * f).powi(2) + b * b) / (1.0 - pole * pole);
        let var_y = c * c * var_x + 1.0;
        // u = -f c x - f e + v
        let var_u = f * f * c * c * var_x + f * f + 1.0;
        let powers = cl.signal_powers().unwrap();
        assert!((powers.z_power_sq - (var_y + var_u)).abs() < 1e-10);
    }

    #[test]
    fn unstable_loop_rejected() {
        let plant = InnovationModel::new(
            scalar(1.2),
            scalar(1.0),
            scalar(1.0),
            scalar(0.0),
            scalar(1.0),
        )
        .unwrap();
        let ctrl = Controller::new(
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(1.0),
        )
        .unwrap();
        assert!(matches!(
            ClosedLoop::assemble(plant, ctrl),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn degenerate_excitation_rejected() {
        let plant = InnovationModel::new(
            scalar(0.5),
            scalar(1.0),
            scalar(1.0),
            scalar(0.0),
            scalar(1.0),
        )
        .unwrap();
        let ctrl = Controller::new(
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
            scalar(0.0),
        )
        .unwrap();
        assert!(matches!(
            ClosedLoop::assemble(plant, ctrl),
            Err(Error::DegenerateNoise { .. })
        ));
    }

    #[test]
    fn mismatched_controller_rejected() {
        let plant = InnovationModel::new(
            scalar(0.5),
            scalar(1.0),
            scalar(1.0),
            scalar(0.0),
            scalar(1.0),
        )
        .unwrap();
        let ctrl = Controller::new(
            scalar(0.0),
            DMatrix::zeros(1, 2),
            scalar(0.0),
            scalar(0.0),
            DMatrix::zeros(1, 2),
            scalar(1.0),
        )
        .unwrap();
        assert!(matches!(
            ClosedLoop::assemble(plant, ctrl),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn open_loop_unstable_plant_stabilized_by_riccati_gain() {
        use crate::linalg::solve_discrete_riccati;
        let sol =
            solve_discrete_riccati(&scalar(1.2), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        // With C = 1 and K = 0 the state is measured up to white noise, so a
        // static output feedback u = -F y + v applies the LQR gain.
        let cl = scalar_feedback(1.2, 1.0, 1.0, 0.0, sol.gain[(0, 0)]);
        assert!(cl.spectral_radius() < 1.0);
        let eig = crate::linalg::eigenvalues(&cl.acl).unwrap();
        assert!(eig.iter().all(|l| l.norm() < 1.0));
    }

    #[test]
    fn psi_must_be_positive_definite() {
        let res = InnovationModel::new(
            scalar(0.5),
            scalar(1.0),
            scalar(1.0),
            scalar(0.0),
            scalar(0.0),
        );
        assert!(matches!(res, Err(Error::DegenerateNoise { .. })));
    }
}
