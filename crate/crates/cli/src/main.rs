//! `mida`: simulation, estimation and Monte-Carlo experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mida_core::graphs::{dag_to_cpdag, Cpdag, MecIndex};
use mida_core::harness::{self, ExperimentConfig};
use mida_core::lsem::{generate_random_lsem, sample};
use mida_core::mida::{MidaContext, RESULT_HEADER};
use mida_core::structure::{estimate_cpdag, residualize_on_treatment, PcConfig};
use mida_core::{Dataset, Error};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "mida", version, about = "Individual mediation effects with unknown mediator structure")]
struct Cli {
    /// Worker threads for experiments (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random SEM and a dataset from it.
    Simulate(SimulateArgs),
    /// Estimate every mediation effect in a dataset.
    Estimate(EstimateArgs),
    /// Confidence-interval coverage by effect magnitude.
    Coverage(ExperimentArgs),
    /// Precision-recall curves and F-scores.
    Pr(PrArgs),
    /// FDR and power of BH with and without screening.
    Fdr(FdrArgs),
    /// Concentration rates of subset OLS.
    Rates(RatesArgs),
    /// Samples of the limiting statistic in the double-zero case.
    Wdensity(WdensityArgs),
}

/// Values are applied in order: config file, then `--set`, then the
/// dedicated flags.
#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// PC significance level (overrides alpha_pc).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_cond_size: Option<usize>,
    #[arg(long)]
    pc_stable: Option<bool>,
    /// Confidence level of the intervals.
    #[arg(long)]
    level: Option<f64>,
    /// estimated, true_cpdag, true_dag or empty.
    #[arg(long)]
    graph_mode: Option<String>,
    /// Override any config field, e.g. `--set replications=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct PrArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// P-value thresholds for the F-score table.
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.05,0.1")]
    thresholds: Vec<f64>,
}

#[derive(Args)]
struct FdrArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// BH levels.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1")]
    bh_alpha: Vec<f64>,
    /// Level of the screening test on the treatment effect.
    #[arg(long, default_value_t = 0.01)]
    screen_level: f64,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Maximum number of covariate subsets (0 keeps all).
    #[arg(long, default_value_t = 10)]
    subsets: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 2.0)]
    d: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    p_treat: f64,
    #[arg(long, default_value_t = 0.1)]
    p_resp: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for spec.json, data.csv and mediator_cpdag.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV with a header; first column treatment, last column response.
    #[arg(long)]
    data: PathBuf,
    /// Results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Mediator CPDAG in text form; estimated by PC when absent.
    #[arg(long)]
    cpdag: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 3)]
    max_cond_size: usize,
    #[arg(long, default_value_t = true)]
    pc_stable: bool,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 16)]
    max_component_size: usize,
}

#[derive(Args)]
struct WdensityArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,0.9")]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for wdensity.csv.
    #[arg(long)]
    out: PathBuf,
}

/// Exit 2 for configuration problems, 1 for failures while running.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn parse_override(s: &str) -> CliResult<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("override '{s}' is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

fn load_config(args: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("malformed config {}: {e}", args.config.display())))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Failure::Config("config must be a JSON object".into()))?;
    for s in &args.overrides {
        let (k, v) = parse_override(s)?;
        obj.insert(k, v);
    }
    let mut set = |k: &str, v: Value| {
        obj.insert(k.to_string(), v);
    };
    if let Some(seed) = args.seed {
        set("seed", seed.into());
    }
    if let Some(a) = args.alpha {
        set("alpha_pc", a.into());
    }
    if let Some(m) = args.max_cond_size {
        set("max_cond_size", m.into());
    }
    if let Some(s) = args.pc_stable {
        set("pc_stable", s.into());
    }
    if let Some(l) = args.level {
        set("level", l.into());
    }
    if let Some(g) = &args.graph_mode {
        set("graph_mode", g.clone().into());
    }
    if let Some(o) = &args.out {
        set("output_dir", o.to_string_lossy().into_owned().into());
    }
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| Failure::Config(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(config)
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_resolved(config: &ExperimentConfig) -> CliResult<()> {
    let text = serde_json::to_string_pretty(config).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(config.output_dir.join("config.json"), text + "\n").map_err(|e| Failure::Runtime(e.to_string()))
}

fn experiment(args: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let config = load_config(args)?;
    prepare_out(&config.output_dir)?;
    write_resolved(&config)?;
    Ok(config)
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    if a.p < 3 {
        return Err(Failure::Config(format!("p must be at least 3, got {}", a.p)));
    }
    if a.n < 2 {
        return Err(Failure::Config(format!("n must be at least 2, got {}", a.n)));
    }
    let mut rng = harness::stream_rng(a.seed, &[0]);
    let spec = generate_random_lsem(a.p, a.d, a.p_treat, a.p_resp, &mut rng).map_err(|e| match e {
        Error::InvalidSpec(m) => Failure::Config(m),
        other => other.into(),
    })?;
    let data = sample(&spec, a.n, &mut rng)?;
    let mediators: Vec<usize> = (2..a.p).collect();
    let cpdag = dag_to_cpdag(&spec.dag().induced_subgraph(&mediators));
    prepare_out(&a.out)?;
    fs::write(a.out.join("spec.json"), spec.to_json() + "\n").map_err(|e| Failure::Runtime(e.to_string()))?;
    data.save_csv(&a.out.join("data.csv"))?;
    fs::write(a.out.join("mediator_cpdag.txt"), cpdag.to_string()).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(())
}

fn estimate(a: &EstimateArgs) -> CliResult<()> {
    let pc = PcConfig {
        alpha: a.alpha,
        max_cond_size: a.max_cond_size,
        stable_variant: a.pc_stable,
    };
    pc.validate()?;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Failure::Config(format!("level must lie in (0, 1), got {}", a.level)));
    }
    let data = Dataset::load_csv(&a.data)?;
    if data.p() < 3 {
        return Err(Failure::Config(format!(
            "need treatment, at least one mediator and a response; got {} columns",
            data.p()
        )));
    }
    let cpdag: Cpdag = match &a.cpdag {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?
            .parse()?,
        None => estimate_cpdag(&residualize_on_treatment(&data)?, &pc)?,
    };
    let mec = MecIndex::new(&cpdag, a.max_component_size)?;
    let results = MidaContext::new(&data)?.estimate_all(&mec, a.level)?;
    let mut wr = csv::Writer::from_path(&a.out).map_err(|e| Failure::Runtime(e.to_string()))?;
    let io = |e: csv::Error| Failure::Runtime(e.to_string());
    wr.write_record(RESULT_HEADER).map_err(io)?;
    for r in &results {
        wr.write_record(r.csv_record()).map_err(io)?;
    }
    wr.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    log::info!("{} mediators, class of {} DAGs", results.len(), mec.mec_size());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Coverage(a) => {
            let c = experiment(a)?;
            let report = harness::run_coverage(&c)?;
            harness::write_rows(&c.output_dir.join("coverage.csv"), &report.rows, &harness::COVERAGE_HEADER)?;
            harness::write_rows(&c.output_dir.join("coverage_eta.csv"), &report.rows_eta, &harness::COVERAGE_HEADER)?;
            Ok(())
        }
        Command::Pr(a) => {
            let c = experiment(&a.common)?;
            let report = harness::run_pr_fscore(&c, &a.thresholds)?;
            harness::write_rows(&c.output_dir.join("pr.csv"), &report.pr, &harness::PR_HEADER)?;
            harness::write_rows(&c.output_dir.join("fscore.csv"), &report.fscore, &harness::FSCORE_HEADER)?;
            Ok(())
        }
        Command::Fdr(a) => {
            let c = experiment(&a.common)?;
            let rows = harness::run_fdr(&c, &a.bh_alpha, a.screen_level)?;
            harness::write_rows(&c.output_dir.join("fdr.csv"), &rows, &harness::FDR_HEADER)?;
            Ok(())
        }
        Command::Rates(a) => {
            let c = experiment(&a.common)?;
            let report = harness::run_rate_check(&c, a.subsets)?;
            harness::write_rows(&c.output_dir.join("rates.csv"), &report.rows, &harness::RATES_HEADER)?;
            harness::write_rows(&c.output_dir.join("diagnostics.csv"), &report.diagnostics, &harness::DIAGNOSTICS_HEADER)?;
            log::info!(
                "slopes: sup_psi_mean {:.3}, sup_remainder {:.3}",
                report.slope_psi_mean,
                report.slope_remainder
            );
            Ok(())
        }
        Command::Wdensity(a) => {
            let rows = harness::run_wdensity(&a.rho, a.samples, a.seed)?;
            prepare_out(&a.out)?;
            harness::write_rows(&a.out.join("wdensity.csv"), &rows, &harness::WDENSITY_HEADER)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
