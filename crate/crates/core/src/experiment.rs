//! Experiment harness: system generation, end-to-end fits, bound tables and
//! the seed × T sweep.
//!
//! Every output is a pure function of the configuration. Training and test
//! trajectories use seeds derived from the system seed, and sweep cells are
//! reassembled in (seed, T) order regardless of how they were scheduled.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    select_t0, theorem1_bound, theorem1_bound_squared, theorem2_bound, BoundInputs, ConstantLedger,
};
use crate::error::{Error, Result};
use crate::format::save_closed_loop;
use crate::models::{random_closed_loop, simulate, ClosedLoop, GeneratorConfig, SystemDims};
use crate::optimal_filter::finite_horizon_kf;
use crate::realization::{
    extract_innovation_form, predict_with_model, reduce_predictor, varx_to_predictor_ss,
    IdentifiedModel,
};
use crate::varx::{fit_varx, predict_varx, Dataset, LagLayout, VarxModel};

pub const REPORT_HEADER: &str = "seed,T,T0,test_mse,oracle_mse,theorem1_bound,theorem1_bound_squared,theorem2_bound,reduced_order,certified_error,ledger,status";

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

/// SplitMix64 finalizer applied to `seed + stream·golden`.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut x = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn default_spectral_target() -> f64 {
    GeneratorConfig::default().spectral_target
}
fn default_alpha() -> f64 {
    1.0
}
fn default_theta() -> f64 {
    0.1
}
fn default_test_length() -> usize {
    10_000
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("redar-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    #[serde(default = "default_spectral_target")]
    pub spectral_target: f64,
    pub p: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub phi: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub t_sweep: Vec<usize>,
    #[serde(default = "default_test_length")]
    pub test_length: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Training length at which `T₀` is tuned; defaults to the largest swept `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_target: Option<f64>,
    /// Defaults to the closed loop's own settling estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    /// Worker threads for the sweep; `None` uses the rayon default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| Error::Schema {
            line: e.span().map_or(0, |s| {
                src[..s.start.min(src.len())].matches('\n').count() + 1
            }),
            message: e.message().to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dims(&self) -> SystemDims {
        SystemDims {
            n_x: self.n_x,
            n_u: self.n_u,
            n_y: self.n_y,
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            spectral_target: self.spectral_target,
            ..GeneratorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_x == 0 || self.n_y == 0 {
            return bad("n_x and n_y must be positive".into());
        }
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if !(self.alpha > 0.0) || !(self.phi > 0.0) {
            return bad(format!(
                "alpha and phi must be positive, got {} and {}",
                self.alpha, self.phi
            ));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        if !(self.spectral_target > 0.0) {
            return bad("spectral_target must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.t_sweep.is_empty() {
            return bad("t_sweep must be nonempty".into());
        }
        if self.t_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return bad("t_sweep must be strictly ascending".into());
        }
        if self.t_sweep[0] < self.p + 1 {
            return bad(format!("every T must be at least p + 1 = {}", self.p + 1));
        }
        if self.test_length == 0 {
            return bad("test_length must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    fn t0_target_or_default(&self) -> f64 {
        self.t0_target
            .unwrap_or(*self.t_sweep.last().expect("validated") as f64)
    }

    fn run_in_pool<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.threads {
            None => Ok(f()),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map(|pool| pool.install(f))
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}"))),
        }
    }
}

pub fn system_file_name(seed: u64) -> String {
    format!("system_seed{seed}.toml")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSystem {
    pub seed: u64,
    pub path: PathBuf,
    pub spectral_radius: f64,
    pub xi: f64,
}

/// Writes one model file per seed into `output_dir`.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Vec<GeneratedSystem>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let cl = random_closed_loop(cfg.dims(), &cfg.generator(), seed)?;
        let path = cfg.output_dir.join(system_file_name(seed));
        save_closed_loop(&cl, &path)?;
        out.push(GeneratedSystem {
            seed,
            path,
            spectral_radius: cl.spectral_radius(),
            xi: cl.xi(),
        });
    }
    Ok(out)
}

/// Inputs to a single end-to-end identification run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub p: usize,
    pub alpha: f64,
    pub phi: f64,
    /// Training regression rows; the simulated record has `t + p` samples.
    pub t: usize,
    pub test_length: usize,
    pub seed: u64,
    pub burn_in: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitMetrics {
    pub t: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub oracle_mse: f64,
    pub reduced_order: usize,
    pub certified_error: f64,
}

impl FitMetrics {
    pub const HEADER: &'static str =
        "T,train_mse,test_mse,oracle_mse,reduced_order,certified_error";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{},{:?}",
            self.t,
            self.train_mse,
            self.test_mse,
            self.oracle_mse,
            self.reduced_order,
            self.certified_error
        )
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: IdentifiedModel,
    pub varx: VarxModel,
    pub metrics: FitMetrics,
}

/// Mean squared one-step error of an identified model, skipping the first
/// `p` predictions while the zero initial state washes out.
pub fn model_mse(model: &IdentifiedModel, ds: &Dataset) -> Result<f64> {
    let z = ds.z();
    let (n_u, p) = (ds.n_u(), ds.p());
    let u = z.columns(0, n_u).into_owned();
    let y = z.columns(n_u, ds.n_y()).into_owned();
    let yhat = predict_with_model(model, &u, &y)?;
    let rows = z.nrows() - p;
    let err = y.rows(p, rows) - yhat.rows(p, rows);
    Ok(err.norm_squared() / rows as f64)
}

/// Algorithm steps after data collection: VARX fit, delay-line realization,
/// balanced reduction and innovation-form extraction.
pub fn redar(train: &Dataset, alpha: f64, phi: f64) -> Result<(VarxModel, IdentifiedModel, f64)> {
    let varx = fit_varx(train, alpha).map_err(|e| e.at_stage("fit_varx"))?;
    let h_a = varx_to_predictor_ss(&varx, train.n_u(), train.n_y())
        .map_err(|e| e.at_stage("varx_to_predictor_ss"))?;
    let h_r = reduce_predictor(&h_a, phi).map_err(|e| e.at_stage("reduce_predictor"))?;
    let model = extract_innovation_form(&h_r, train.n_u(), train.n_y())
        .map_err(|e| e.at_stage("extract_innovation_form"))?;
    Ok((varx, model, h_r.certified_error))
}

fn simulate_dataset(
    cl: &ClosedLoop,
    len: usize,
    p: usize,
    burn_in: Option<usize>,
    seed: u64,
) -> Result<Dataset> {
    let traj = simulate(
        cl,
        len + p,
        burn_in.unwrap_or_else(|| cl.default_burn_in()),
        seed,
    )?;
    Dataset::from_trajectory(&traj, p)
}

fn oracle_mse(cl: &ClosedLoop, test: &Dataset) -> Result<(DMatrix<f64>, f64)> {
    let (g, _) = finite_horizon_kf(cl, test.p()).map_err(|e| e.at_stage("finite_horizon_kf"))?;
    let model = VarxModel {
        g: g.clone(),
        p: test.p(),
        alpha: 0.0,
        layout: LagLayout::NewestFirst,
    };
    let (_, mse) = predict_varx(&model, test)?;
    Ok((g, mse))
}

/// Simulates training and test data from `cl` and runs the full pipeline.
pub fn cmd_fit(cl: &ClosedLoop, opts: &FitOptions) -> Result<FitOutcome> {
    let train = simulate_dataset(
        cl,
        opts.t,
        opts.p,
        opts.burn_in,
        stream_seed(opts.seed, TRAIN_STREAM),
    )
    .map_err(|e| e.at_stage("simulate"))?;
    let test = simulate_dataset(
        cl,
        opts.test_length,
        opts.p,
        opts.burn_in,
        stream_seed(opts.seed, TEST_STREAM),
    )
    .map_err(|e| e.at_stage("simulate"))?;
    fit_on(cl, &train, &test, opts.alpha, opts.phi)
}

/// Pipeline on supplied data; the oracle column needs the true system.
pub fn fit_on(
    cl: &ClosedLoop,
    train: &Dataset,
    test: &Dataset,
    alpha: f64,
    phi: f64,
) -> Result<FitOutcome> {
    let (varx, model, certified_error) = redar(train, alpha, phi)?;
    let train_mse = model_mse(&model, train).map_err(|e| e.at_stage("evaluate"))?;
    let test_mse = model_mse(&model, test).map_err(|e| e.at_stage("evaluate"))?;
    let (_, oracle) = oracle_mse(cl, test)?;
    Ok(FitOutcome {
        metrics: FitMetrics {
            t: train.t_count(),
            train_mse,
            test_mse,
            oracle_mse: oracle,
            reduced_order: model.order(),
            certified_error,
        },
        model,
        varx,
    })
}

/// A bound cell: a number, or `invalid` when `T < T₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundCell {
    Value(f64),
    Invalid,
    Unavailable,
}

impl BoundCell {
    pub fn value(self) -> Option<f64> {
        match self {
            BoundCell::Value(v) => Some(v),
            _ => None,
        }
    }

    fn from_result(r: Result<f64>) -> Self {
        match r {
            Ok(v) => BoundCell::Value(v),
            Err(Error::TBelowT0 { .. }) => BoundCell::Invalid,
            Err(_) => BoundCell::Unavailable,
        }
    }
}

impl std::fmt::Display for BoundCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundCell::Value(v) => write!(f, "{v:?}"),
            BoundCell::Invalid => f.write_str("invalid"),
            BoundCell::Unavailable => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub theorem1: BoundCell,
    pub theorem1_squared: BoundCell,
    pub theorem2: BoundCell,
}

#[derive(Debug, Clone)]
pub struct BoundTable {
    pub inputs: BoundInputs,
    pub ledger: ConstantLedger,
    pub rows: Vec<BoundRow>,
}

impl BoundTable {
    pub const HEADER: &'static str = "T,theorem1_bound,theorem1_bound_squared,theorem2_bound";

    pub fn csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.t, r.theorem1, r.theorem1_squared, r.theorem2
            );
        }
        out
    }
}

fn bound_row(inputs: &BoundInputs, ledger: &ConstantLedger, theta: f64, t: usize) -> BoundRow {
    let tf = t as f64;
    BoundRow {
        t,
        theorem1: BoundCell::from_result(theorem1_bound(inputs, ledger, tf)),
        theorem1_squared: BoundCell::from_result(theorem1_bound_squared(inputs, ledger, tf)),
        theorem2: BoundCell::from_result(theorem2_bound(inputs, theta, tf).map(|r| r.value)),
    }
}

/// Prediction-error and H∞-gap bounds over `ts`, with `T₀` tuned at `t0_target`.
pub fn cmd_bound(
    cl: &ClosedLoop,
    p: usize,
    alpha: f64,
    phi: f64,
    theta: f64,
    ts: &[usize],
    t0_target: Option<f64>,
) -> Result<BoundTable> {
    if ts.is_empty() {
        return Err(Error::InvalidArgument("no T values given".into()));
    }
    let inputs =
        BoundInputs::from_closed_loop(cl, p, alpha, phi).map_err(|e| e.at_stage("bound_inputs"))?;
    let target = t0_target.unwrap_or_else(|| ts.iter().copied().max().expect("nonempty") as f64);
    let ledger = select_t0(&inputs, target).map_err(|e| e.at_stage("select_t0"))?;
    let rows = ts
        .iter()
        .map(|&t| bound_row(&inputs, &ledger, theta, t))
        .collect();
    Ok(BoundTable {
        inputs,
        ledger,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub seed: u64,
    pub t: usize,
    pub t0: Option<f64>,
    pub test_mse: Option<f64>,
    pub oracle_mse: Option<f64>,
    pub theorem1: BoundCell,
    pub theorem1_squared: BoundCell,
    pub theorem2: BoundCell,
    pub reduced_order: Option<usize>,
    pub certified_error: Option<f64>,
    /// File holding this seed's constant ledger.
    pub ledger: String,
    /// `ok`, or the first error met while producing the row.
    pub status: String,
}

impl ReportRow {
    /// Test MSE above a valid prediction-error bound.
    pub fn violates(&self) -> bool {
        matches!((self.test_mse, self.theorem1), (Some(m), BoundCell::Value(b)) if m > b)
    }

    fn csv(&self) -> String {
        fn opt<T: std::fmt::Debug>(x: Option<T>) -> String {
            x.map_or(String::new(), |v| format!("{v:?}"))
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.t,
            opt(self.t0),
            opt(self.test_mse),
            opt(self.oracle_mse),
            self.theorem1,
            self.theorem1_squared,
            self.theorem2,
            opt(self.reduced_order),
            opt(self.certified_error),
            self.ledger,
            csv_field(&self.status)
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    /// Seeds whose system could not be generated.
    pub generation_failures: Vec<u64>,
}

impl ExperimentReport {
    pub fn csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    pub fn violations(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.violates()).collect()
    }

    /// 0 success, 2 bound violation, 3 generation failure.
    pub fn exit_code(&self) -> i32 {
        if !self.violations().is_empty() {
            2
        } else if !self.generation_failures.is_empty() {
            3
        } else {
            0
        }
    }
}

struct SeedContext {
    seed: u64,
    system: Result<ClosedLoop>,
    train: Option<Dataset>,
    test: Option<Dataset>,
    oracle: Option<f64>,
    bounds: Option<(BoundInputs, ConstantLedger)>,
    /// First failure in data or bound preparation.
    note: Option<String>,
}

fn ledger_file_name(seed: u64) -> String {
    format!("ledger_seed{seed}.csv")
}

fn prepare_seed(cfg: &ExperimentConfig, seed: u64) -> SeedContext {
    let mut ctx = SeedContext {
        seed,
        system: random_closed_loop(cfg.dims(), &cfg.generator(), seed),
        train: None,
        test: None,
        oracle: None,
        bounds: None,
        note: None,
    };
    let Ok(cl) = &ctx.system else { return ctx };
    let t_max = *cfg.t_sweep.last().expect("validated");
    let note = |e: Error, ctx_note: &mut Option<String>| {
        ctx_note.get_or_insert_with(|| e.to_string());
    };
    match simulate_dataset(
        cl,
        t_max,
        cfg.p,
        cfg.burn_in,
        stream_seed(seed, TRAIN_STREAM),
    ) {
        Ok(d) => ctx.train = Some(d),
        Err(e) => note(e.at_stage("simulate"), &mut ctx.note),
    }
    match simulate_dataset(
        cl,
        cfg.test_length,
        cfg.p,
        cfg.burn_in,
        stream_seed(seed, TEST_STREAM),
    ) {
        Ok(d) => ctx.test = Some(d),
        Err(e) => note(e.at_stage("simulate"), &mut ctx.note),
    }
    if let Some(test) = &ctx.test {
        match oracle_mse(cl, test) {
            Ok((_, m)) => ctx.oracle = Some(m),
            Err(e) => note(e, &mut ctx.note),
        }
    }
    let bounds = BoundInputs::from_closed_loop(cl, cfg.p, cfg.alpha, cfg.phi)
        .map_err(|e| e.at_stage("bound_inputs"))
        .and_then(|inputs| {
            let ledger = select_t0(&inputs, cfg.t0_target_or_default())
                .map_err(|e| e.at_stage("select_t0"))?;
            Ok((inputs, ledger))
        });
    match bounds {
        Ok(b) => ctx.bounds = Some(b),
        Err(e) => note(e, &mut ctx.note),
    }
    ctx
}

fn sweep_cell(cfg: &ExperimentConfig, ctx: &SeedContext, t: usize) -> ReportRow {
    let mut row = ReportRow {
        seed: ctx.seed,
        t,
        t0: ctx.bounds.as_ref().map(|(_, l)| l.t0),
        test_mse: None,
        oracle_mse: ctx.oracle,
        theorem1: BoundCell::Unavailable,
        theorem1_squared: BoundCell::Unavailable,
        theorem2: BoundCell::Unavailable,
        reduced_order: None,
        certified_error: None,
        ledger: if ctx.bounds.is_some() {
            ledger_file_name(ctx.seed)
        } else {
            String::new()
        },
        status: "ok".into(),
    };
    if let Err(e) = &ctx.system {
        row.status = e.to_string();
        return row;
    }
    if let Some((inputs, ledger)) = &ctx.bounds {
        let b = bound_row(inputs, ledger, cfg.theta, t);
        row.theorem1 = b.theorem1;
        row.theorem1_squared = b.theorem1_squared;
        row.theorem2 = b.theorem2;
    }
    let fitted = match (&ctx.train, &ctx.test) {
        (Some(train), Some(test)) => train.prefix(t).and_then(|tr| {
            let (_, model, cert) = redar(&tr, cfg.alpha, cfg.phi)?;
            let mse = model_mse(&model, test).map_err(|e| e.at_stage("evaluate"))?;
            Ok((model.order(), cert, mse))
        }),
        _ => Err(Error::InvalidArgument("no data".into())),
    };
    match fitted {
        Ok((order, cert, mse)) => {
            row.reduced_order = Some(order);
            row.certified_error = Some(cert);
            row.test_mse = Some(mse);
        }
        Err(e) => row.status = e.to_string(),
    }
    if row.status == "ok" {
        if let Some(n) = &ctx.note {
            row.status = n.clone();
        }
    }
    row
}

/// Runs the sweep without touching the file system.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (contexts, rows) = cfg.run_in_pool(|| {
        let contexts: Vec<SeedContext> = cfg
            .seeds
            .par_iter()
            .map(|&s| prepare_seed(cfg, s))
            .collect();
        let cells: Vec<(usize, usize)> = (0..contexts.len())
            .flat_map(|i| cfg.t_sweep.iter().map(move |&t| (i, t)))
            .collect();
        let mut rows: Vec<ReportRow> = cells
            .par_iter()
            .map(|&(i, t)| sweep_cell(cfg, &contexts[i], t))
            .collect();
        rows.sort_by_key(|r| (r.seed, r.t));
        (contexts, rows)
    })?;
    let mut generation_failures: Vec<u64> = contexts
        .iter()
        .filter(|c| c.system.is_err())
        .map(|c| c.seed)
        .collect();
    generation_failures.sort_unstable();
    generation_failures.dedup();
    Ok(ExperimentReport {
        rows,
        generation_failures,
    })
}

/// Artifacts written by [`cmd_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub report_path: PathBuf,
}

/// Runs the sweep and writes `report.csv`, the resolved `config.toml`, one
/// ledger and two plot-data files per seed (`plot_seed{s}_bound.dat` holding
/// `T bound` for valid rows, `plot_seed{s}_mse.dat` holding `T test_mse`).
pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let report = run_experiment(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let report_path = dir.join("report.csv");
    std::fs::write(&report_path, report.csv())?;

    let mut seeds: Vec<u64> = cfg.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    for seed in seeds {
        let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.seed == seed).collect();
        let mut bound = String::from("# T theorem1_bound\n");
        let mut mse = String::from("# T test_mse\n");
        for r in &rows {
            if let BoundCell::Value(b) = r.theorem1 {
                let _ = writeln!(bound, "{} {b:?}", r.t);
            }
            if let Some(m) = r.test_mse {
                let _ = writeln!(mse, "{} {m:?}", r.t);
            }
        }
        std::fs::write(dir.join(format!("plot_seed{seed}_bound.dat")), bound)?;
        std::fs::write(dir.join(format!("plot_seed{seed}_mse.dat")), mse)?;
    }
    // Ledgers are recomputed here rather than carried through the report.
    for seed in cfg.seeds.iter().copied() {
        if report.generation_failures.contains(&seed) {
            continue;
        }
        let ledger = random_closed_loop(cfg.dims(), &cfg.generator(), seed)
            .and_then(|cl| BoundInputs::from_closed_loop(&cl, cfg.p, cfg.alpha, cfg.phi))
            .and_then(|inputs| select_t0(&inputs, cfg.t0_target_or_default()));
        if let Ok(ledger) = ledger {
            std::fs::write(dir.join(ledger_file_name(seed)), ledger.dump())?;
        }
    }
    Ok(ExperimentOutput {
        report,
        report_path,
    })
}
