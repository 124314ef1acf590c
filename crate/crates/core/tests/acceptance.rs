//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails when any criterion fails, except those listed in
//! `KNOWN_RED`, which are reported as FAIL and left that way.

mod common;

use std::time::Instant;

use common::{gaussian, median, rng, stable_matrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use redar::bounds::{optimize_rho, select_t0, tail_term, theorem2_bound, BoundInputs};
use redar::experiment::{run_experiment, BoundCell, ExperimentConfig};
use redar::linalg::{
    grid_peak_gain, hinf_norm, lambda_max_sym, lambda_min_sym, solve_discrete_lyapunov,
    solve_discrete_riccati, spectral_norm, StateSpace, HINF_TOL,
};
use redar::models::{random_closed_loop, simulate, ClosedLoop, GeneratorConfig, SystemDims};
use redar::optimal_filter::{exact_moments, finite_horizon_kf, steady_state_kf, tail_system};
use redar::realization::{extract_innovation_form, reduce_predictor, varx_to_predictor_ss};
use redar::varx::{fit_varx, solve_moments, Dataset};

/// Clauses that cannot hold in general; see the decisions ledger.
const KNOWN_RED: &[&str] = &["7e"];

struct Report {
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        println!(
            "{} criterion {id}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn siso_dims(i: u64) -> SystemDims {
    SystemDims {
        n_x: 1 + (i as usize % 4),
        n_u: 1,
        n_y: 1,
    }
}

fn ensemble(i: u64) -> ClosedLoop {
    random_closed_loop(siso_dims(i), &GeneratorConfig::default(), i).unwrap()
}

fn sweep() -> Vec<usize> {
    (8..=14).map(|k| 1usize << k).collect()
}

fn criterion_1(rep: &mut Report) {
    let start = Instant::now();
    let (mut cells, mut checked, mut violations) = (0, 0, 0);
    let (mut below_formula, mut min_t0) = (0, f64::INFINITY);
    for p in [4usize, 8] {
        for phi in [0.05, 0.2] {
            let cfg = ExperimentConfig::from_toml(&format!(
                "n_x = 4\nn_u = 1\nn_y = 1\np = {p}\nphi = {phi}\nt_sweep = {:?}\nseeds = [0, 1, 2, 3, 4]\ntest_length = 10000\n",
                sweep()
            ))
            .unwrap();
            let report = run_experiment(&cfg).unwrap();
            for r in &report.rows {
                cells += 1;
                assert_eq!(r.status, "ok", "seed {} T {}", r.seed, r.t);
                min_t0 = min_t0.min(r.t0.unwrap());
                if let BoundCell::Value(b) = r.theorem1 {
                    checked += 1;
                    if r.test_mse.unwrap() > b {
                        violations += 1;
                    }
                }
            }
            // The same formula evaluated below its validity threshold.
            for seed in 0..5u64 {
                let cl = random_closed_loop(cfg.dims(), &cfg.generator(), seed).unwrap();
                let inputs = BoundInputs::from_closed_loop(&cl, p, 1.0, phi).unwrap();
                let ledger = select_t0(&inputs, 16384.0).unwrap();
                let z2 = inputs.z_power * inputs.z_power;
                for r in report.rows.iter().filter(|r| r.seed == seed) {
                    let formula = inputs.e_power_sq
                        + tail_term(inputs.l, inputs.rho, p, inputs.z_power)
                        + 2.0 * phi * z2
                        + 2.0 * ledger.k * p as f64 / (r.t as f64).sqrt() * z2;
                    if r.test_mse.unwrap() <= formula {
                        below_formula += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let vacuous = if checked == 0 {
        " (vacuous: no swept T reaches T0)"
    } else {
        ""
    };
    rep.line(
        "1",
        violations == 0 && secs < 300.0,
        format!(
            "{checked} of {cells} cells have T >= T0, {violations} violations{vacuous}; smallest T0 = {min_t0:.3e}; \
             test MSE below the bound formula in {below_formula} of {cells} cells ignoring T0; {secs:.1} s"
        ),
    );
}

/// `r_k = Σ_i h_{i+k} h_iᵀ` from the impulse response of `J`.
fn impulse_autocovariances(j: &StateSpace, max_lag: usize) -> Vec<DMatrix<f64>> {
    let mut h = vec![j.d.clone()];
    let mut ab = j.b.clone();
    loop {
        let next = &j.c * &ab;
        let done = ab.norm() < 1e-20 * j.b.norm().max(1e-300) || h.len() > 20_000;
        h.push(next);
        ab = &j.a * ab;
        if done {
            break;
        }
    }
    (0..=max_lag)
        .map(|k| {
            let mut r = DMatrix::zeros(j.d.nrows(), j.d.nrows());
            for i in 0..h.len() - k {
                r += &h[i + k] * h[i].transpose();
            }
            r
        })
        .collect()
}

fn oracle_g_opt(cl: &ClosedLoop, p: usize) -> DMatrix<f64> {
    let (n_u, n_z) = (cl.n_u(), cl.n_z());
    let n_y = n_z - n_u;
    let r = impulse_autocovariances(&cl.build_j(), p);
    let mut q = DMatrix::zeros(p * n_z, p * n_z);
    for a in 0..p {
        for b in 0..p {
            let block = if b >= a {
                r[b - a].clone()
            } else {
                r[a - b].transpose()
            };
            q.view_mut((a * n_z, b * n_z), (n_z, n_z)).copy_from(&block);
        }
    }
    let mut n = DMatrix::zeros(n_y, p * n_z);
    for a in 0..p {
        n.view_mut((0, a * n_z), (n_y, n_z))
            .copy_from(&r[a + 1].rows(n_u, n_y));
    }
    // G Q = N  <=>  Qᵀ Gᵀ = Nᵀ
    q.transpose()
        .lu()
        .solve(&n.transpose())
        .unwrap()
        .transpose()
}

fn criterion_2(rep: &mut Report) {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let dims = SystemDims {
            n_x: 1 + (i as usize % 4),
            n_u: 1 + (i as usize % 2),
            n_y: 1 + (i as usize / 2 % 2),
        };
        let cl = random_closed_loop(dims, &GeneratorConfig::default(), 100 + i).unwrap();
        let p = 2 + (i as usize % 4);
        let oracle = oracle_g_opt(&cl, p);
        let m = exact_moments(&cl, p).unwrap();
        for ridge in [0.0, 1.0 / 1e14] {
            let g = solve_moments(&m.q, &m.n, ridge).unwrap();
            worst = worst.max((g - &oracle).norm());
        }
    }
    rep.line(
        "2",
        worst <= 1e-8,
        format!("max ||G - G_OPT||_F = {worst:.3e} over 20 systems (tolerance 1e-8)"),
    );
}

fn criterion_3(rep: &mut Report) {
    let cl = ensemble(3);
    let p = 4;
    let ts: Vec<usize> = (8..=16).map(|k| 1usize << k).collect();
    let t_max = *ts.last().unwrap();
    let (g_opt, _) = finite_horizon_kf(&cl, p).unwrap();
    let mut errors = vec![Vec::new(); ts.len()];
    for seed in 0..20 {
        let traj = simulate(&cl, t_max + p, cl.default_burn_in(), 700 + seed).unwrap();
        let ds = Dataset::from_trajectory(&traj, p).unwrap();
        for (i, &t) in ts.iter().enumerate() {
            let g = fit_varx(&ds.prefix(t).unwrap(), 1.0).unwrap().g;
            errors[i].push((g - &g_opt).norm_squared());
        }
    }
    let medians: Vec<f64> = errors.into_iter().map(median).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let inputs = BoundInputs::from_closed_loop(&cl, p, 1.0, 0.05).unwrap();
    let ledger = select_t0(&inputs, t_max as f64).unwrap();
    let (mut checked, mut within) = (0, true);
    for (&t, &m) in ts.iter().zip(&medians) {
        if t as f64 >= ledger.t0 {
            checked += 1;
            within &= m <= ledger.k / (t as f64).sqrt();
        }
    }
    let vacuous = if checked == 0 { " (vacuous)" } else { "" };
    rep.line(
        "3",
        decreasing && within,
        format!(
            "medians {:.3e} -> {:.3e}, strictly decreasing = {decreasing}; k/sqrt(T) checked at {checked} of {} T{vacuous}, \
             k = {:.3e}, T0 = {:.3e}",
            medians[0],
            medians[medians.len() - 1],
            ts.len(),
            ledger.k,
            ledger.t0
        ),
    );
}

fn criterion_4(rep: &mut Report) {
    let (mut worst_gap, mut worst_cert): (f64, f64) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..50u64 {
        let cl = random_closed_loop(siso_dims(i), &GeneratorConfig::default(), 200 + i).unwrap();
        let p = 3 + (i as usize % 6);
        let phi = [0.01, 0.05, 0.2][i as usize % 3];
        let traj = simulate(&cl, 1000 + p, cl.default_burn_in(), i).unwrap();
        let m = fit_varx(&Dataset::from_trajectory(&traj, p).unwrap(), 1.0).unwrap();
        let h_a = varx_to_predictor_ss(&m, 1, 1).unwrap();
        let h_r = reduce_predictor(&h_a, phi).unwrap();
        let (gap, _) = grid_peak_gain(&h_a.ss.difference(&h_r.ss).unwrap(), 4096);
        worst_gap = worst_gap.max(gap - phi);
        worst_cert = worst_cert.max(h_r.certified_error - phi);
    }
    rep.line(
        "4",
        worst_gap <= 1e-6 && worst_cert <= 0.0,
        format!("max (grid gap - phi) = {worst_gap:.3e}, max (certified - phi) = {worst_cert:.3e} over 50 fits"),
    );
}

fn criterion_5(rep: &mut Report) {
    let (mut decay_ok, mut worst_tail): (bool, f64) = (true, 0.0);
    for i in 0..20u64 {
        let cl = random_closed_loop(siso_dims(i), &GeneratorConfig::default(), 300 + i).unwrap();
        let p = [2usize, 4, 8][i as usize % 3];
        let h = steady_state_kf(&cl.plant).unwrap();
        let (rho, l) = optimize_rho(&h, p).unwrap();
        for k in 1..=50 {
            decay_ok &= spectral_norm(&h.markov_parameter(k)) <= l * rho.powi(k as i32);
        }
        let (tail, _) = grid_peak_gain(&tail_system(&cl.plant, p).unwrap(), 4096);
        let bound = l * rho.powi(p as i32 + 1) / (1.0 - rho);
        worst_tail = worst_tail.max(tail / (bound * (1.0 + 1e-3)));
    }
    rep.line(
        "5",
        decay_ok && worst_tail <= 1.0,
        format!("||H_i|| <= L rho^i for i = 1..50 on 20 plants: {decay_ok}; max tail / bound = {worst_tail:.4}"),
    );
}

fn criterion_6(rep: &mut Report) {
    let cl = ensemble(6);
    let (p, t, theta, phi) = (4, 1usize << 12, 0.1, 0.05);
    let (_, h_opt) = finite_horizon_kf(&cl, p).unwrap();
    let inputs = BoundInputs::from_closed_loop(&cl, p, 1.0, phi).unwrap();
    let bound = theorem2_bound(&inputs, theta, t as f64).unwrap();
    let trials = 200;
    let mut covered = 0;
    let mut gaps = Vec::with_capacity(trials);
    for seed in 0..trials as u64 {
        let traj = simulate(&cl, t + p, cl.default_burn_in(), 9000 + seed).unwrap();
        let m = fit_varx(&Dataset::from_trajectory(&traj, p).unwrap(), 1.0).unwrap();
        let h_r = reduce_predictor(&varx_to_predictor_ss(&m, 1, 1).unwrap(), phi).unwrap();
        let (gap, _) = grid_peak_gain(&h_opt.ss.difference(&h_r.ss).unwrap(), 4096);
        gaps.push(gap);
        if gap <= bound.value {
            covered += 1;
        }
    }
    let rate = covered as f64 / trials as f64;
    rep.line(
        "6",
        rate >= 0.9,
        format!(
            "coverage {covered}/{trials} = {rate:.3}; bound {:.3e} ({:?}), median gap {:.3e}",
            bound.value,
            bound.branch,
            median(gaps)
        ),
    );
}

fn criterion_7(rep: &mut Report) {
    let mut r = rng(77);
    let mut worst_res: f64 = 0.0;
    for i in 0..50 {
        let n = 1 + i % 8;
        let a = stable_matrix(&mut r, n, 0.95);
        let m = gaussian(&mut r, n, n);
        let w = &m * m.transpose();
        let x = solve_discrete_lyapunov(&a, &w).unwrap();
        worst_res = worst_res.max((&x - &a * &x * a.transpose() - &w).amax());
    }
    rep.line(
        "7a",
        worst_res <= 1e-10,
        format!("max Lyapunov residual {worst_res:.3e} on 50 random inputs"),
    );

    let one = |x: f64| DMatrix::from_element(1, 1, x);
    let sys = StateSpace::new(one(0.5), one(1.0), one(1.0), one(0.0)).unwrap();
    let h = hinf_norm(&sys, HINF_TOL).unwrap();
    rep.line(
        "7b",
        (h - 2.0).abs() <= 1e-6,
        format!("H-infinity norm of 1/(z - 0.5) = {h:.9}"),
    );

    let x = solve_discrete_riccati(&one(1.0), &one(1.0), &one(1.0), &one(1.0))
        .unwrap()
        .p[(0, 0)];
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    rep.line(
        "7c",
        (x - golden).abs() <= 1e-10,
        format!("scalar Riccati fixed point {x:.12} vs {golden:.12}"),
    );

    let (mut upper_ok, mut lower_fail) = (true, 0);
    let mut worst_ratio = f64::INFINITY;
    for i in 0..50u64 {
        let dims = SystemDims {
            n_x: 1 + (i as usize % 4),
            n_u: 1,
            n_y: 1 + (i as usize / 4 % 2),
        };
        let cl = random_closed_loop(dims, &GeneratorConfig::default(), 400 + i).unwrap();
        let q = exact_moments(&cl, 4).unwrap().q;
        let j = hinf_norm(&cl.build_j(), HINF_TOL).unwrap();
        upper_ok &= lambda_max_sym(&q) <= j * j;
        let ratio = lambda_min_sym(&q) / cl.xi();
        worst_ratio = worst_ratio.min(ratio);
        if ratio < 1.0 {
            lower_fail += 1;
        }
    }
    rep.line(
        "7d",
        upper_ok,
        format!("lambda_max(Q) <= ||J||^2 on 50 systems: {upper_ok}"),
    );
    rep.line(
        "7e",
        lower_fail == 0,
        format!("lambda_min(Q) >= lambda_min(Gamma) fails on {lower_fail} of 50 systems, min ratio {worst_ratio:.3e}"),
    );
}

fn criterion_8(rep: &mut Report) {
    let (mut exact, mut zero_tail, mut worst_tf) = (true, true, 0.0f64);
    for i in 0..10u64 {
        let dims = SystemDims {
            n_x: 1 + (i as usize % 4),
            n_u: 1 + (i as usize % 2),
            n_y: 1 + (i as usize / 2 % 2),
        };
        let cl = random_closed_loop(dims, &GeneratorConfig::default(), 500 + i).unwrap();
        let p = 2 + (i as usize % 5);
        let traj = simulate(&cl, 2000 + p, cl.default_burn_in(), i).unwrap();
        let ds = Dataset::from_trajectory(&traj, p).unwrap();
        let m = fit_varx(&ds, 1.0).unwrap();
        let h_a = varx_to_predictor_ss(&m, ds.n_u(), ds.n_y()).unwrap();
        for lag in 1..=p {
            exact &= h_a.ss.markov_parameter(lag) == m.lag_block(lag);
        }
        for lag in p + 1..=2 * p {
            zero_tail &= h_a.ss.markov_parameter(lag).amax() <= f64::EPSILON;
        }
        let h_r = reduce_predictor(&h_a, 0.02).unwrap();
        let rebuilt = extract_innovation_form(&h_r, ds.n_u(), ds.n_y())
            .unwrap()
            .predictor();
        let (f1, f2) = (h_r.ss.frequency_response(), rebuilt.frequency_response());
        for k in 0..512 {
            let z = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 512.0);
            let d = (f1.eval(z) - f2.eval(z))
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            worst_tf = worst_tf.max(d);
        }
    }
    rep.line(
        "8",
        exact && zero_tail && worst_tf <= 1e-9,
        format!("lag blocks exact: {exact}; lags p+1..2p zero: {zero_tail}; round-trip max deviation {worst_tf:.3e}"),
    );
}

fn main() {
    let mut rep = Report { failed: Vec::new() };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    criterion_7(&mut rep);
    criterion_8(&mut rep);
    let unexpected: Vec<&String> = rep
        .failed
        .iter()
        .filter(|id| !KNOWN_RED.contains(&id.as_str()))
        .collect();
    let known: Vec<&String> = rep
        .failed
        .iter()
        .filter(|id| KNOWN_RED.contains(&id.as_str()))
        .collect();
    println!(
        "acceptance: {} failing, known red: {known:?}, unexpected: {unexpected:?}",
        rep.failed.len()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
