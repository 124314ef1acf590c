//! Non-asymptotic error bounds for the identified predictor.
//!
//! [`theorem1_bound`] bounds the expected one-step prediction error after `T`
//! training samples; [`theorem2_bound`] bounds `‖H^OPT − H^R‖∞` with
//! probability at least `1 − θ`. Both are assembled from the constants in
//! [`ConstantLedger`].

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{circle_peak, golden_max, hinf_norm, StateSpace, HINF_TOL};
use crate::models::ClosedLoop;
use crate::optimal_filter::steady_state_kf;

/// Angles sampled on `|z| = ρ` when computing the envelope level.
pub const ENVELOPE_GRID: usize = 2048;
/// Multiplicative margin applied to the measured envelope peak.
pub const ENVELOPE_SAFETY: f64 = 1.001;
/// Radii scanned by [`optimize_rho`] before local refinement.
pub const RHO_GRID: usize = 64;
/// Number of log-spaced `T₀` candidates scanned by [`select_t0`].
pub const T0_CANDIDATES: usize = 16;

/// Everything the bounds need to know about one closed-loop system and one
/// choice of algorithm parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Envelope level `L` with `‖H*(z)‖ ≤ L` for `|z| ≥ ρ`.
    pub l: f64,
    pub rho: f64,
    /// `‖z‖_P`
    pub z_power: f64,
    /// `‖e‖_P²`
    pub e_power_sq: f64,
    /// `‖J‖∞`
    pub j_norm: f64,
    /// `λ_min(Γ)`
    pub xi: f64,
    pub p: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub alpha: f64,
    pub phi: f64,
}

impl BoundInputs {
    /// Evaluates every input from a known closed loop, choosing `ρ` by
    /// [`optimize_rho`].
    pub fn from_closed_loop(cl: &ClosedLoop, p: usize, alpha: f64, phi: f64) -> Result<Self> {
        let h_star = steady_state_kf(&cl.plant)?;
        let (rho, l) = optimize_rho(&h_star, p)?;
        let powers = cl.signal_powers()?;
        let j_norm = hinf_norm(&cl.build_j(), HINF_TOL)?;
        let inputs = Self {
            l,
            rho,
            z_power: powers.z_power(),
            e_power_sq: powers.e_power_sq,
            j_norm,
            xi: cl.xi(),
            p,
            n_u: cl.n_u(),
            n_y: cl.n_y(),
            alpha,
            phi,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn n_z(&self) -> usize {
        self.n_u + self.n_y
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("z_power", self.z_power),
            ("e_power_sq", self.e_power_sq),
            ("j_norm", self.j_norm),
            ("xi", self.xi),
            ("alpha", self.alpha),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !(self.l.is_finite() && self.l >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "L must be finite and nonnegative, got {}",
                self.l
            )));
        }
        if !(self.phi.is_finite() && self.phi >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "phi must be finite and nonnegative, got {}",
                self.phi
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if self.p == 0 || self.n_y == 0 {
            return Err(Error::InvalidArgument("p and n_y must be positive".into()));
        }
        Ok(())
    }
}

/// `max_{|z| = ρ} σ_max(H*(z))` times [`ENVELOPE_SAFETY`]. By the maximum
/// modulus principle this bounds `‖H*(z)‖` on all of `|z| ≥ ρ`.
pub fn kf_envelope(h_star: &StateSpace, rho: f64) -> Result<f64> {
    kf_envelope_with_grid(h_star, rho, ENVELOPE_GRID)
}

pub fn kf_envelope_with_grid(h_star: &StateSpace, rho: f64, n_points: usize) -> Result<f64> {
    let radius = h_star.spectral_radius()?;
    if !(rho > radius) || !(rho < 1.0) {
        return Err(Error::RhoTooSmall { rho, radius });
    }
    let (peak, _) = circle_peak(&h_star.frequency_response(), rho, n_points);
    Ok(peak * ENVELOPE_SAFETY)
}

/// `L ρ^{p+1} / (1 − ρ) · ‖z‖_P`
pub fn tail_term(l: f64, rho: f64, p: usize, z_power: f64) -> f64 {
    l * rho.powi(p as i32 + 1) / (1.0 - rho) * z_power
}

/// Chooses `ρ ∈ (ρ(A − KC), 1)` minimizing `L(ρ) ρ^{p+1} / (1 − ρ)`. Radii are
/// scanned log-uniformly in `1 − ρ`, then the best bracket is refined by
/// golden-section search. Returns `(ρ*, L(ρ*))`.
pub fn optimize_rho(h_star: &StateSpace, p: usize) -> Result<(f64, f64)> {
    let radius = h_star.spectral_radius()?;
    if radius >= 1.0 {
        return Err(Error::PredictorUnstable { radius });
    }
    let lo = radius + 1e-6;
    let hi = 1.0 - 1e-6;
    if lo >= hi {
        return Err(Error::RhoTooSmall { rho: hi, radius });
    }
    let resp = h_star.frequency_response();
    let envelope = |rho: f64| circle_peak(&resp, rho, ENVELOPE_GRID).0 * ENVELOPE_SAFETY;
    // s = ln(1 − ρ), scanned from ln(1 − lo) down to ln(1 − hi)
    let s_max = (1.0 - lo).ln();
    let s_min = (1.0 - hi).ln();
    let rho_of = |s: f64| (1.0 - s.exp()).clamp(lo, hi);
    let objective = |s: f64| {
        let rho = rho_of(s);
        envelope(rho) * rho.powi(p as i32 + 1) / (1.0 - rho)
    };
    let step = (s_max - s_min) / (RHO_GRID - 1) as f64;
    let grid: Vec<f64> = (0..RHO_GRID).map(|i| s_min + i as f64 * step).collect();
    let values: Vec<f64> = grid.iter().map(|&s| objective(s)).collect();
    let best = (0..RHO_GRID)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("nonempty grid");
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(RHO_GRID - 1)];
    let (s_ref, neg) = golden_max(|s| -objective(s), a, b);
    let s_star = if -neg < values[best] {
        s_ref
    } else {
        grid[best]
    };
    let rho = rho_of(s_star);
    Ok((rho, envelope(rho)))
}

/// Number of distinct entries of `ΔN` and `ΔQ`: `p n_y n_z + p n_z (p n_z + 1)/2`.
pub fn count_b(p: usize, n_y: usize, n_z: usize) -> usize {
    let d = p * n_z;
    p * n_y * n_z + d * (d + 1) / 2
}

/// `δ = 4‖J‖∞² max{ℓ, √ℓ}` with `ℓ = (2/T) log(2b/θ)`: the entrywise deviation
/// of `(Q_T, N_T)` from `(Q, N)` that is exceeded with probability below `θ`.
pub fn concentration_delta(theta: f64, t: f64, j_norm: f64, b: usize) -> f64 {
    let ell = 2.0 / t * (2.0 * b as f64 / theta).ln();
    4.0 * j_norm * j_norm * ell.max(ell.sqrt())
}

/// Upper bound on `P(max |ΔQ_ij|, |ΔN_ij| > δ)`:
/// `2b exp(−T min{δ²/(32‖J‖∞⁴), δ/(8‖J‖∞²)})`.
pub fn deviation_probability(delta: f64, t: f64, j_norm: f64, b: usize) -> f64 {
    let j2 = j_norm * j_norm;
    let rate = (delta * delta / (32.0 * j2 * j2)).min(delta / (8.0 * j2));
    (2.0 * b as f64 * (-t * rate).exp()).min(1.0)
}

/// A summand `a T^{m − 1/2} exp(−rate T^n)` of the finite-data integral bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyExpTerm {
    pub a: f64,
    pub m: f64,
    pub n: f64,
    pub rate: f64,
}

impl PolyExpTerm {
    /// `a T^m exp(−rate T^n)`, evaluated in log space.
    pub fn scaled(&self, t: f64) -> f64 {
        (self.a.ln() + self.m * t.ln() - self.rate * t.powf(self.n)).exp()
    }

    /// The summand itself, `scaled(T) / √T`.
    pub fn value(&self, t: f64) -> f64 {
        self.scaled(t) / t.sqrt()
    }

    /// Maximizer of [`PolyExpTerm::scaled`]; it decreases for larger `T`.
    pub fn t_max(&self) -> f64 {
        (self.m / (self.n * self.rate)).powf(1.0 / self.n)
    }
}

/// Every constant in the finite-data bound `E‖G_T − G_OPT‖² ≤ k/√T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantLedger {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `ε₀` at `T₀`
    pub epsilon0: f64,
    /// `ε₁` at `T₀`
    pub epsilon1: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub lambda: f64,
    pub c10: f64,
    pub c11: f64,
    pub c12: f64,
    pub sigma: f64,
    pub c13: f64,
    pub c14: f64,
    pub c15: f64,
    pub b: usize,
    /// The `T₀` used inside `c₆`.
    pub t0_candidate: f64,
    /// Summands 2 through 9.
    pub terms: Vec<PolyExpTerm>,
    pub t_max: Vec<f64>,
    /// `k₁` through `k₉`.
    pub k_i: Vec<f64>,
    pub k: f64,
    pub t0: f64,
}

/// `max{2α/ξ, p, 4, 2α²/ξ²}`, below which the derivation does not apply.
pub fn t0_floor(inputs: &BoundInputs) -> f64 {
    let (alpha, xi) = (inputs.alpha, inputs.xi);
    (2.0 * alpha / xi)
        .max(inputs.p as f64)
        .max(4.0)
        .max(2.0 * alpha * alpha / (xi * xi))
}

pub fn constant_ledger(inputs: &BoundInputs, t0_candidate: f64) -> Result<ConstantLedger> {
    inputs.validate()?;
    let floor = t0_floor(inputs);
    if !(t0_candidate >= floor) {
        return Err(Error::InvalidT0 {
            candidate: t0_candidate,
            floor,
        });
    }
    let (p, n_y, n_z) = (inputs.p as f64, inputs.n_y as f64, inputs.n_z() as f64);
    let (alpha, xi) = (inputs.alpha, inputs.xi);
    let j2 = inputs.j_norm * inputs.j_norm;
    let j4 = j2 * j2;
    let b = count_b(inputs.p, inputs.n_y, inputs.n_z());
    let bf = b as f64;

    let c1 = (p * n_y * n_z).sqrt();
    let c2 = p * n_z;
    let c3 = c1 + j2 * c2 / xi;
    let c4 = j2 * alpha / xi;

    let t0c = t0_candidate;
    let epsilon0 = (2.0 * j2 * alpha / (xi * xi * t0c.powf(0.25))).powi(2);
    let epsilon1 = (2.0 * j2 * t0c / alpha).powi(2);

    let c5 = (4.0 * c4 / xi).powi(2);
    let c6 = alpha / (8.0 * xi * (2.0 * c2 * j2 * alpha / (xi * xi * t0c.powf(0.25)) + c3));
    let c7 = c4 / (4.0 * j2 * (c2 * 4.0 * c4 / xi + c3));
    let c8 = 2.0 * bf * c5;
    let c9 = 8.0 * bf * j4 / (alpha * alpha);

    let lambda = 8.0 * j2 * c3 / alpha;
    let shift = (j2 / (xi * lambda)).exp();
    let c10 = 8.0 * bf * lambda * j2 / alpha * shift;
    let c11 = 4.0 * bf * lambda * lambda * shift;
    let c12 = alpha * lambda / (2.0 * j2);

    let sigma = 4.0 * c3 * j2 / alpha;
    let c13 = 4.0 * bf * sigma * sigma;
    let c14 = 8.0 * bf * alpha * sigma * sigma / xi;
    let c15 = 2.0 * sigma * sigma * alpha * alpha / j4;

    let term = |a: f64, m: f64, n: f64, rate: f64| PolyExpTerm { a, m, n, rate };
    let terms = vec![
        term(c8, 0.5, 0.75, c6 / 2.0),
        term(c8, 0.5, 0.5, c6 * c6 / 2.0),
        term(c9, 2.5, 1.0, c7 / 2.0),
        term(c9, 2.5, 1.0, c7 * c7 / 2.0),
        term(c10, 1.5, 1.0, 1.0 / c12),
        term(c11, 0.5, 1.0, 1.0 / c12),
        term(c13, 1.5, 1.0, 1.0 / c15),
        term(c14, 0.5, 1.0, 1.0 / c15),
    ];
    let t_max: Vec<f64> = terms.iter().map(PolyExpTerm::t_max).collect();
    let t0 = t_max.iter().copied().fold(t0c, f64::max);

    let k1 = 4.0 * j4 * alpha * alpha / xi.powi(4);
    let mut k_i = vec![k1];
    k_i.extend(terms.iter().map(|t| t.scaled(t0)));
    let k = k_i.iter().sum();

    Ok(ConstantLedger {
        c1,
        c2,
        c3,
        c4,
        epsilon0,
        epsilon1,
        c5,
        c6,
        c7,
        c8,
        c9,
        lambda,
        c10,
        c11,
        c12,
        sigma,
        c13,
        c14,
        c15,
        b,
        t0_candidate,
        terms,
        t_max,
        k_i,
        k,
        t0,
    })
}

impl ConstantLedger {
    /// Plain-text table of every constant and its defining formula.
    pub fn dump(&self) -> String {
        let mut rows: Vec<(String, f64, &str)> = vec![
            ("c1".into(), self.c1, "sqrt(p n_y n_z)"),
            ("c2".into(), self.c2, "p n_z"),
            ("c3".into(), self.c3, "c1 + |J|^2 c2 / xi"),
            ("c4".into(), self.c4, "|J|^2 alpha / xi"),
            (
                "epsilon0".into(),
                self.epsilon0,
                "(2 |J|^2 alpha / (xi^2 T0^(1/4)))^2",
            ),
            ("epsilon1".into(), self.epsilon1, "(2 |J|^2 T0 / alpha)^2"),
            ("c5".into(), self.c5, "(4 c4 / xi)^2"),
            (
                "c6".into(),
                self.c6,
                "alpha / (8 xi (2 c2 |J|^2 alpha / (xi^2 T0^(1/4)) + c3))",
            ),
            ("c7".into(), self.c7, "c4 / (4 |J|^2 (4 c2 c4 / xi + c3))"),
            ("c8".into(), self.c8, "2 b c5"),
            ("c9".into(), self.c9, "8 b |J|^4 / alpha^2"),
            ("lambda".into(), self.lambda, "8 |J|^2 c3 / alpha"),
            (
                "c10".into(),
                self.c10,
                "8 b lambda |J|^2 / alpha exp(|J|^2 / (xi lambda))",
            ),
            (
                "c11".into(),
                self.c11,
                "4 b lambda^2 exp(|J|^2 / (xi lambda))",
            ),
            ("c12".into(), self.c12, "alpha lambda / (2 |J|^2)"),
            ("sigma".into(), self.sigma, "4 c3 |J|^2 / alpha"),
            ("c13".into(), self.c13, "4 b sigma^2"),
            ("c14".into(), self.c14, "8 b alpha sigma^2 / xi"),
            ("c15".into(), self.c15, "2 sigma^2 alpha^2 / |J|^4"),
            (
                "b".into(),
                self.b as f64,
                "p n_y n_z + p n_z (p n_z + 1) / 2",
            ),
            ("T0_candidate".into(), self.t0_candidate, "scanned"),
        ];
        rows.push(("k1".into(), self.k_i[0], "4 |J|^4 alpha^2 / xi^4"));
        for (i, (k, tm)) in self.k_i[1..].iter().zip(&self.t_max).enumerate() {
            rows.push((format!("k{}", i + 2), *k, "a_i T0^m_i exp(-b_i T0^n_i)"));
            rows.push((format!("Tmax{}", i + 2), *tm, "(m_i / (n_i b_i))^(1/n_i)"));
        }
        rows.push(("k".into(), self.k, "sum k_i"));
        rows.push(("T0".into(), self.t0, "max(T0_candidate, Tmax_i)"));

        let mut out = String::from("constant,value,formula\n");
        for (name, value, formula) in rows {
            let _ = writeln!(out, "{name},{value:e},{formula}");
        }
        out
    }
}

/// Scans [`T0_CANDIDATES`] log-spaced candidates in `[floor, max(floor, t_target)]`
/// and keeps the ledger with the smallest prediction-error bound at `t_target`.
/// Candidates whose final `T₀` exceeds `t_target` are used only if none is valid,
/// in which case the one with the smallest `T₀` is returned.
pub fn select_t0(inputs: &BoundInputs, t_target: f64) -> Result<ConstantLedger> {
    let floor = t0_floor(inputs);
    let top = floor.max(t_target);
    let ratio = (top / floor).ln();
    let mut best_valid: Option<(f64, ConstantLedger)> = None;
    let mut best_fallback: Option<ConstantLedger> = None;
    for i in 0..T0_CANDIDATES {
        let frac = i as f64 / (T0_CANDIDATES - 1) as f64;
        let candidate = if i == 0 {
            floor
        } else {
            (floor.ln() + frac * ratio).exp().max(floor)
        };
        let ledger = constant_ledger(inputs, candidate)?;
        match theorem1_bound(inputs, &ledger, t_target) {
            Ok(v) if best_valid.as_ref().is_none_or(|(bv, _)| v < *bv) => {
                best_valid = Some((v, ledger))
            }
            Ok(_) => {}
            Err(Error::TBelowT0 { .. }) => {
                if best_fallback.as_ref().is_none_or(|l| ledger.t0 < l.t0) {
                    best_fallback = Some(ledger);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(best_valid
        .map(|(_, l)| l)
        .or(best_fallback)
        .expect("at least one candidate"))
}

/// Individual contributions to the prediction-error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Terms {
    /// `‖e‖_P²`
    pub noise: f64,
    /// `Lρ^{p+1}/(1−ρ) ‖z‖_P`
    pub tail: f64,
    /// `2φ‖z‖_P²`
    pub reduction: f64,
    /// `2kp/√T ‖z‖_P²`
    pub data: f64,
}

impl Theorem1Terms {
    pub fn total(&self) -> f64 {
        self.noise + self.tail + self.reduction + self.data
    }
}

pub fn theorem1_terms(
    inputs: &BoundInputs,
    ledger: &ConstantLedger,
    t: f64,
) -> Result<Theorem1Terms> {
    if !(t >= ledger.t0) {
        return Err(Error::TBelowT0 { t, t0: ledger.t0 });
    }
    let z2 = inputs.z_power * inputs.z_power;
    Ok(Theorem1Terms {
        noise: inputs.e_power_sq,
        tail: tail_term(inputs.l, inputs.rho, inputs.p, inputs.z_power),
        reduction: 2.0 * inputs.phi * z2,
        data: 2.0 * ledger.k * inputs.p as f64 / t.sqrt() * z2,
    })
}

/// `‖e‖_P² + Lρ^{p+1}/(1−ρ)‖z‖_P + 2φ‖z‖_P² + 2kp/√T ‖z‖_P²`, valid for `T ≥ T₀`.
pub fn theorem1_bound(inputs: &BoundInputs, ledger: &ConstantLedger, t: f64) -> Result<f64> {
    Ok(theorem1_terms(inputs, ledger, t)?.total())
}

/// Variant with the tail and reduction contributions squared, as they enter
/// the error decomposition: `‖e‖_P² + (Lρ^{p+1}/(1−ρ))²‖z‖_P² + 2φ²‖z‖_P² + 2kp/√T ‖z‖_P²`.
pub fn theorem1_bound_squared(
    inputs: &BoundInputs,
    ledger: &ConstantLedger,
    t: f64,
) -> Result<f64> {
    let terms = theorem1_terms(inputs, ledger, t)?;
    let z2 = inputs.z_power * inputs.z_power;
    let tail = tail_term(inputs.l, inputs.rho, inputs.p, 1.0);
    Ok(terms.noise + tail * tail * z2 + 2.0 * inputs.phi * inputs.phi * z2 + terms.data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem2Branch {
    /// `δ ≤ (ξ − 2α/T)/c₂`
    SmallDeviation,
    LargeDeviation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem2Result {
    pub value: f64,
    pub delta: f64,
    pub branch: Theorem2Branch,
    /// `δ` within rounding of the branch point; `value` is then the larger of
    /// the two expressions.
    pub at_boundary: bool,
}

/// High-probability bound on `‖H^OPT − H^R‖∞`.
pub fn theorem2_bound(inputs: &BoundInputs, theta: f64, t: f64) -> Result<Theorem2Result> {
    inputs.validate()?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta must lie in (0, 1], got {theta}"
        )));
    }
    if !(t >= inputs.p as f64) {
        return Err(Error::InvalidArgument(format!(
            "T = {t} is below p = {}",
            inputs.p
        )));
    }
    let b = count_b(inputs.p, inputs.n_y, inputs.n_z());
    let delta = concentration_delta(theta, t, inputs.j_norm, b);
    Ok(theorem2_from_delta(inputs, delta, t))
}

pub(crate) fn theorem2_from_delta(inputs: &BoundInputs, delta: f64, t: f64) -> Theorem2Result {
    let j2 = inputs.j_norm * inputs.j_norm;
    let (alpha, xi, p) = (inputs.alpha, inputs.xi, inputs.p as f64);
    let c2 = p * inputs.n_z() as f64;
    let c1 = (p * inputs.n_y as f64 * inputs.n_z() as f64).sqrt();
    let c3 = c1 + j2 * c2 / xi;
    let c4 = j2 * alpha / xi;
    let numer = c3 * delta + c4 / t;
    let small = numer / (xi - c2 * delta - alpha / t) * p + inputs.phi;
    let large = t * numer / alpha * p + inputs.phi;
    let threshold = (xi - 2.0 * alpha / t) / c2;
    let at_boundary = (delta - threshold).abs() <= 1e-12 * threshold.abs().max(1.0);
    if at_boundary {
        let branch = if small >= large {
            Theorem2Branch::SmallDeviation
        } else {
            Theorem2Branch::LargeDeviation
        };
        return Theorem2Result {
            value: small.max(large),
            delta,
            branch,
            at_boundary,
        };
    }
    if delta <= threshold {
        Theorem2Result {
            value: small,
            delta,
            branch: Theorem2Branch::SmallDeviation,
            at_boundary,
        }
    } else {
        Theorem2Result {
            value: large,
            delta,
            branch: Theorem2Branch::LargeDeviation,
            at_boundary,
        }
    }
}
