use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use redar::experiment::{
    cmd_bound, cmd_experiment, cmd_fit, cmd_generate, fit_on, ExperimentConfig, FitMetrics,
    FitOptions,
};
use redar::format::{load_closed_loop, save_identified};
use redar::varx::Dataset;
use redar::Error;

const EXIT_VIOLATION: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_OTHER: u8 = 1;

/// Closed-loop identification with reduced autoregressive models.
#[derive(Parser)]
#[command(name = "redar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw random plant/controller pairs and write one model file per seed.
    Generate(ConfigArgs),
    /// Simulate data from a model file and run the identification pipeline.
    Fit(FitArgs),
    /// Tabulate the error bounds for a model file over a list of T.
    Bound(BoundArgs),
    /// Run the full seed by T sweep and write the report.
    Experiment(ConfigArgs),
}

/// Every field of the experiment configuration. Flags override the file.
#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "n_x", alias = "n-x")]
    n_x: Option<usize>,
    #[arg(long = "n_u", alias = "n-u")]
    n_u: Option<usize>,
    #[arg(long = "n_y", alias = "n-y")]
    n_y: Option<usize>,
    #[arg(long = "spectral_target", alias = "spectral-target")]
    spectral_target: Option<f64>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Comma-separated training lengths.
    #[arg(long = "t_sweep", alias = "t-sweep", value_delimiter = ',')]
    t_sweep: Option<Vec<usize>>,
    #[arg(long = "test_length", alias = "test-length")]
    test_length: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long = "output_dir", alias = "output-dir")]
    output_dir: Option<PathBuf>,
    #[arg(long = "t0_target", alias = "t0-target")]
    t0_target: Option<f64>,
    #[arg(long = "burn_in", alias = "burn-in")]
    burn_in: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Closed-loop model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    phi: f64,
    /// Training length (regression rows). Ignored with --data.
    #[arg(long, default_value_t = 4096)]
    t: usize,
    #[arg(long = "test_length", alias = "test-length", default_value_t = 10_000)]
    test_length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "burn_in", alias = "burn-in")]
    burn_in: Option<usize>,
    /// Training data as CSV (u columns then y columns) instead of simulation.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Where to write the identified model.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the metrics row; printed to stdout when absent.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    phi: f64,
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    /// Comma-separated training lengths.
    #[arg(long = "t", value_delimiter = ',', required = true)]
    t: Vec<usize>,
    #[arg(long = "t0_target", alias = "t0-target")]
    t0_target: Option<f64>,
    /// Bound table destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Constant ledger destination; appended to stdout when absent.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

impl ConfigArgs {
    fn overrides(&self) -> toml::Table {
        let mut t = toml::Table::new();
        let mut put = |k: &str, v: Option<toml::Value>| {
            if let Some(v) = v {
                t.insert(k.to_string(), v);
            }
        };
        let int = |x: usize| toml::Value::Integer(x as i64);
        put("n_x", self.n_x.map(int));
        put("n_u", self.n_u.map(int));
        put("n_y", self.n_y.map(int));
        put(
            "spectral_target",
            self.spectral_target.map(toml::Value::Float),
        );
        put("p", self.p.map(int));
        put("alpha", self.alpha.map(toml::Value::Float));
        put("phi", self.phi.map(toml::Value::Float));
        put("theta", self.theta.map(toml::Value::Float));
        put(
            "t_sweep",
            self.t_sweep
                .as_ref()
                .map(|v| toml::Value::Array(v.iter().map(|&x| int(x)).collect())),
        );
        put("test_length", self.test_length.map(int));
        put(
            "seeds",
            self.seeds.as_ref().map(|v| {
                toml::Value::Array(v.iter().map(|&x| toml::Value::Integer(x as i64)).collect())
            }),
        );
        put(
            "output_dir",
            self.output_dir
                .as_ref()
                .map(|p| toml::Value::String(p.to_string_lossy().into_owned())),
        );
        put("t0_target", self.t0_target.map(toml::Value::Float));
        put("burn_in", self.burn_in.map(int));
        put("threads", self.threads.map(int));
        t
    }

    fn resolve(&self) -> redar::Result<ExperimentConfig> {
        let mut table = match &self.config {
            Some(path) => {
                let src = std::fs::read_to_string(path)?;
                // Parse once through the typed path so schema errors carry lines.
                if let Err(e) = ExperimentConfig::from_toml(&src) {
                    if !matches!(&e, Error::Schema { message, .. } if message.contains("missing field"))
                    {
                        return Err(e);
                    }
                }
                src.parse::<toml::Table>().map_err(|e| Error::Schema {
                    line: 0,
                    message: e.to_string(),
                })?
            }
            None => toml::Table::new(),
        };
        table.extend(self.overrides());
        ExperimentConfig::from_toml(&toml::to_string(&table).expect("table serializes")).map_err(
            |e| match e {
                Error::Schema { message, .. } => {
                    Error::InvalidArgument(format!("configuration: {message}"))
                }
                e => e,
            },
        )
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { source, .. } => exit_code(source),
        Error::GenerationFailed { .. } => EXIT_GENERATION,
        Error::Io(_) | Error::Schema { .. } | Error::Csv(_) => EXIT_IO,
        _ => EXIT_OTHER,
    }
}

fn run(cli: Cli) -> redar::Result<u8> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = args.resolve()?;
            for s in cmd_generate(&cfg)? {
                println!(
                    "seed={} spectral_radius={:.6} lambda_min_gamma={:.6e} file={}",
                    s.seed,
                    s.spectral_radius,
                    s.xi,
                    s.path.display()
                );
            }
            Ok(0)
        }
        Command::Fit(args) => {
            let cl = load_closed_loop(&args.model)?;
            let outcome = match &args.data {
                None => cmd_fit(
                    &cl,
                    &FitOptions {
                        p: args.p,
                        alpha: args.alpha,
                        phi: args.phi,
                        t: args.t,
                        test_length: args.test_length,
                        seed: args.seed,
                        burn_in: args.burn_in,
                    },
                )?,
                Some(path) => {
                    let train = Dataset::load_csv(path, args.p)?;
                    let test = redar::models::simulate(
                        &cl,
                        args.test_length + args.p,
                        args.burn_in.unwrap_or_else(|| cl.default_burn_in()),
                        redar::experiment::stream_seed(args.seed, 2),
                    )
                    .and_then(|traj| Dataset::from_trajectory(&traj, args.p))
                    .map_err(|e| e.at_stage("simulate"))?;
                    fit_on(&cl, &train, &test, args.alpha, args.phi)?
                }
            };
            save_identified(&outcome.model, &args.out)?;
            let text = format!("{}\n{}\n", FitMetrics::HEADER, outcome.metrics.csv_row());
            match &args.metrics {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Bound(args) => {
            let cl = load_closed_loop(&args.model)?;
            let table = cmd_bound(
                &cl,
                args.p,
                args.alpha,
                args.phi,
                args.theta,
                &args.t,
                args.t0_target,
            )?;
            match &args.out {
                Some(path) => std::fs::write(path, table.csv())?,
                None => print!("{}", table.csv()),
            }
            match &args.ledger {
                Some(path) => std::fs::write(path, table.ledger.dump())?,
                None => print!("\n{}", table.ledger.dump()),
            }
            Ok(0)
        }
        Command::Experiment(args) => {
            let cfg = args.resolve()?;
            let out = cmd_experiment(&cfg)?;
            let report = &out.report;
            let checked = report
                .rows
                .iter()
                .filter(|r| r.theorem1.value().is_some() && r.test_mse.is_some())
                .count();
            let violations = report.violations();
            println!(
                "rows={} checked={} violations={} report={}",
                report.rows.len(),
                checked,
                violations.len(),
                out.report_path.display()
            );
            for r in &violations {
                eprintln!(
                    "violation: seed={} T={} mse={:?} bound={}",
                    r.seed, r.t, r.test_mse, r.theorem1
                );
            }
            for s in &report.generation_failures {
                eprintln!("generation failed for seed {s}");
            }
            Ok(match report.exit_code() {
                2 => EXIT_VIOLATION,
                3 => EXIT_GENERATION,
                _ => 0,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_IO } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
