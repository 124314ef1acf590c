mod common;

use common::{median, siso_loop};
use redar::bounds::{select_t0, tail_term, theorem1_bound, theorem1_terms, BoundInputs};
use redar::experiment::{
    cmd_experiment, cmd_fit, run_experiment, BoundCell, ExperimentConfig, FitOptions,
};
use redar::format::write_identified;
use redar::models::simulate;
use redar::optimal_filter::exact_moments;
use redar::realization::predict_with_model;
use redar::varx::Dataset;

fn config(seeds: Vec<u64>, t_sweep: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        "n_x = 3\nn_u = 1\nn_y = 1\np = 4\nphi = 0.05\nt_sweep = {t_sweep:?}\nseeds = {seeds:?}\ntest_length = 10000\n"
    ))
    .unwrap()
}

#[test]
fn three_point_sweep_has_no_violations() {
    let report = run_experiment(&config(vec![7], vec![256, 1024, 4096])).unwrap();
    assert_eq!(report.rows.len(), 3);
    for r in &report.rows {
        assert_eq!(r.status, "ok");
        assert!(r.test_mse.is_some());
        if let BoundCell::Value(b) = r.theorem1 {
            assert!(r.test_mse.unwrap() <= b);
        }
    }
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn oracle_error_never_above_fitted_error() {
    let report = run_experiment(&config(vec![1, 2, 3, 4], vec![256, 1024, 4096])).unwrap();
    for r in &report.rows {
        assert!(
            r.oracle_mse.unwrap() <= r.test_mse.unwrap(),
            "seed {} T {}",
            r.seed,
            r.t
        );
    }
}

#[test]
fn experiment_output_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = config(vec![5, 6], vec![128, 512]);
    cfg.output_dir = a.path().to_path_buf();
    cmd_experiment(&cfg).unwrap();
    cfg.output_dir = b.path().to_path_buf();
    cfg.threads = Some(1);
    cmd_experiment(&cfg).unwrap();
    for name in [
        "report.csv",
        "ledger_seed5.csv",
        "plot_seed6_mse.dat",
        "plot_seed6_bound.dat",
    ] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn test_error_respects_innovation_floor() {
    let cl = siso_loop(13, 3);
    for seed in 0..5 {
        let out = cmd_fit(
            &cl,
            &FitOptions {
                p: 4,
                alpha: 1.0,
                phi: 0.05,
                t: 2048,
                test_length: 10_000,
                seed,
                burn_in: None,
            },
        )
        .unwrap();
        let traj = simulate(&cl, 10_004, cl.default_burn_in(), seed ^ 0xABCD).unwrap();
        let ds = Dataset::from_trajectory(&traj, 4).unwrap();
        let yhat = predict_with_model(&out.model, &traj.u, &traj.y).unwrap();
        let errs: Vec<f64> = (4..ds.z().nrows())
            .map(|t| (traj.y.row(t) - yhat.row(t)).norm_squared())
            .collect();
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let floor = cl.signal_powers().unwrap().e_power_sq;
        assert!(mean >= floor - 3.0 * sd / n.sqrt(), "{mean} < {floor}");
    }
}

#[test]
fn median_error_falls_with_more_data() {
    let sweep = vec![256, 1024, 4096, 16384];
    let report = run_experiment(&config((0..20).collect(), sweep.clone())).unwrap();
    let medians: Vec<f64> = sweep
        .iter()
        .map(|&t| {
            median(
                report
                    .rows
                    .iter()
                    .filter(|r| r.t == t)
                    .map(|r| r.test_mse.unwrap())
                    .collect(),
            )
        })
        .collect();
    for w in medians.windows(2) {
        assert!(w[1] <= w[0], "{medians:?}");
    }
}

#[test]
fn huge_budget_gives_static_predictor() {
    let cl = siso_loop(3, 2);
    let out = cmd_fit(
        &cl,
        &FitOptions {
            p: 3,
            alpha: 1.0,
            phi: 1e9,
            t: 1000,
            test_length: 10_000,
            seed: 1,
            burn_in: None,
        },
    )
    .unwrap();
    assert_eq!(out.metrics.reduced_order, 0);
    let power = exact_moments(&cl, 1).unwrap().output_power();
    assert!(
        (out.metrics.test_mse - power).abs() <= 0.05 * power,
        "{} vs {power}",
        out.metrics.test_mse
    );
}

#[test]
fn long_fit_approaches_oracle() {
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let cl = siso_loop(seed, 3);
        let opts = FitOptions {
            p: 8,
            alpha: 1.0,
            phi: 0.005,
            t: 1 << 14,
            test_length: 10_000,
            seed,
            burn_in: None,
        };
        let m = cmd_fit(&cl, &opts).unwrap().metrics;
        ratios.push(m.test_mse / m.oracle_mse - 1.0);
    }
    let med = median(ratios.clone());
    assert!(med <= 0.05, "median excess {med}, {ratios:?}");
}

#[test]
fn fit_is_deterministic() {
    let cl = siso_loop(9, 2);
    let opts = FitOptions {
        p: 4,
        alpha: 1.0,
        phi: 0.05,
        t: 1500,
        test_length: 2000,
        seed: 3,
        burn_in: None,
    };
    let a = cmd_fit(&cl, &opts).unwrap();
    let b = cmd_fit(&cl, &opts).unwrap();
    assert_eq!(write_identified(&a.model), write_identified(&b.model));
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn theorem1_asymptote_is_the_t_independent_part() {
    let cl = siso_loop(1, 3);
    let (p, phi) = (4, 0.05);
    let inputs = BoundInputs::from_closed_loop(&cl, p, 1.0, phi).unwrap();
    let ledger = select_t0(&inputs, 16384.0).unwrap();
    let powers = cl.signal_powers().unwrap();
    let asymptote = powers.e_power_sq
        + tail_term(inputs.l, inputs.rho, p, powers.z_power())
        + 2.0 * phi * powers.z_power_sq;
    assert!(theorem1_bound(&inputs, &ledger, 1e12).is_err() == (1e12 < ledger.t0));
    for t in [ledger.t0, ledger.t0 * 1e12, 1e120] {
        let terms = theorem1_terms(&inputs, &ledger, t).unwrap();
        assert_eq!(
            terms.total(),
            terms.noise + terms.tail + terms.reduction + terms.data
        );
        let rest = terms.noise + terms.tail + terms.reduction;
        assert!((rest - asymptote).abs() <= 1e-9 * asymptote, "T = {t}");
    }
    let far = theorem1_bound(&inputs, &ledger, 1e120).unwrap();
    assert!(
        (far - asymptote).abs() <= 1e-9 * asymptote,
        "{far} vs {asymptote}"
    );
}
