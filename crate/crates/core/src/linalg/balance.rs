use nalgebra::DMatrix;

use super::{psd_factor, solve_discrete_lyapunov, StateSpace};
use crate::error::{Error, Result};

/// Hankel singular values at or below this fraction of the largest are treated
/// as exact zeros (structurally uncontrollable or unobservable directions).
const NEGLIGIBLE_HSV: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct BalancedReduction {
    pub reduced: StateSpace,
    /// `2 Σ_{i>r} σᵢ`, an upper bound on `‖sys − reduced‖∞`.
    pub certified_error: f64,
    /// Hankel singular values of the input system, descending.
    pub hankel_singular_values: Vec<f64>,
}

struct Balancing {
    hsv: Vec<f64>,
    /// Right factor `L_c V` and left factor `Wᵀ L_oᵀ` of the balancing transform,
    /// before scaling by `Σ^{-1/2}`.
    right: DMatrix<f64>,
    left: DMatrix<f64>,
}

fn balancing(sys: &StateSpace) -> Result<Balancing> {
    let radius = sys.spectral_radius()?;
    if radius >= 1.0 {
        return Err(Error::NotStable { radius });
    }
    let ctrb = solve_discrete_lyapunov(&sys.a, &(&sys.b * sys.b.transpose()))?;
    let obsv = solve_discrete_lyapunov(&sys.a.transpose(), &(sys.c.transpose() * &sys.c))?;
    let lc = psd_factor(&ctrb);
    let lo = psd_factor(&obsv);
    let svd = (lo.transpose() * &lc).svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let hsv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = v_t.transpose().select_columns(&order);
    let w = u.select_columns(&order);
    Ok(Balancing {
        hsv,
        right: lc * v,
        left: w.transpose() * lo.transpose(),
    })
}

/// Hankel singular values (descending) from the square-root factors of the
/// controllability and observability Gramians.
pub fn hankel_singular_values(sys: &StateSpace) -> Result<Vec<f64>> {
    if sys.n_states() == 0 {
        return Ok(Vec::new());
    }
    Ok(balancing(sys)?.hsv)
}

/// Balanced truncation to the smallest order `r` with `2 Σ_{i>r} σᵢ ≤ budget`.
///
/// The feedthrough is kept unchanged. States whose Hankel singular value is
/// negligible relative to the largest carry no input-output energy and are
/// always removed at no cost to the certificate.
pub fn balanced_truncate(sys: &StateSpace, budget: f64) -> Result<BalancedReduction> {
    if !(budget >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "budget must be nonnegative, got {budget}"
        )));
    }
    if sys.n_states() == 0 {
        return Ok(BalancedReduction {
            reduced: sys.clone(),
            certified_error: 0.0,
            hankel_singular_values: Vec::new(),
        });
    }
    let bal = balancing(sys)?;
    let hsv = &bal.hsv;
    let floor = NEGLIGIBLE_HSV * hsv[0];
    let significant = hsv.iter().take_while(|&&s| s > floor).count();

    // tail[r] = Σ_{i ≥ r} σᵢ over the significant values
    let mut tail = vec![0.0; significant + 1];
    for i in (0..significant).rev() {
        tail[i] = tail[i + 1] + hsv[i];
    }
    let order = (0..=significant)
        .find(|&r| 2.0 * tail[r] <= budget)
        .unwrap_or(significant);
    let certified_error = 2.0 * tail[order];

    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        order,
        hsv[..order].iter().map(|s| 1.0 / s.sqrt()),
    ));
    let t_right = bal.right.columns(0, order) * &scale;
    let t_left = &scale * bal.left.rows(0, order);
    let reduced = StateSpace::new(
        &t_left * &sys.a * &t_right,
        &t_left * &sys.b,
        &sys.c * &t_right,
        sys.d.clone(),
    )?;
    Ok(BalancedReduction {
        reduced,
        certified_error,
        hankel_singular_values: bal.hsv,
    })
}
