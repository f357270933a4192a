use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hawkeslob::calibration::{deviation_measures, heuristic_start, mle_fit, FitOptions, GradientMode};
use hawkeslob::classification::{ClassifiedStream, CountRow};
use hawkeslob::diagnostics::{run_diagnostics, DiagnosticsOptions, DiagnosticsReport};
use hawkeslob::hawkes::EventStream;
use hawkeslob::injection::InjectionModel;
use hawkeslob::pipeline::{simulate_run, RunConfig};

mod config;
mod report;

use config::{load_config, load_params, parse_types, write_manifest};

#[derive(Parser)]
#[command(name = "hawkeslob", version, about = "Hawkes order flow through a matching engine: simulate, calibrate, validate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one model and write the event streams and market data.
    Simulate(SimulateArgs),
    /// Fit a Hawkes model to a classified stream.
    Calibrate(CalibrateArgs),
    /// Residual tests, likelihood-ratio test and parameter uncertainty.
    Validate(ValidateArgs),
    /// Run all three models end to end for a set of seeds and write a report.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Reference,
    Model1,
    Model2,
}

impl From<ModelArg> for InjectionModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Reference => InjectionModel::Reference,
            ModelArg::Model1 => InjectionModel::Model1,
            ModelArg::Model2 => InjectionModel::Model2,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StartArg {
    True,
    Heuristic,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradientArg {
    Automatic,
    FiniteDifference,
}

/// Settings shared by every command; flags override the config file.
#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Horizon in seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Comma-separated 1-based event types of a sub-model, e.g. 1,2,3,4.
    #[arg(long)]
    types: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, Option<PathBuf>)> {
        let (mut config, base) = load_config(self.config.as_deref())?;
        if let Some(h) = self.horizon {
            config.horizon_s = h;
        }
        if let Some(t) = &self.types {
            config.types = Some(parse_types(t)?);
        }
        config.validate().context("invalid configuration")?;
        Ok((config, base))
    }

    fn out_dir(&self, default: &str) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    /// Classified stream (`time_s,type`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "true")]
    start: StartArg,
    /// Parameter file for `--start file`.
    #[arg(long)]
    start_file: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "automatic")]
    gradient: GradientArg,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Classified stream (`time_s,type`).
    #[arg(long)]
    input: PathBuf,
    /// Fitted parameters: a calibration result or a parameter file.
    #[arg(long)]
    theta_hat: PathBuf,
    /// Generating parameters; the configured parameters when absent.
    #[arg(long)]
    theta_true: Option<PathBuf>,
    /// Ljung-Box lags.
    #[arg(long, default_value_t = 20)]
    lags: usize,
}

#[derive(Args)]
struct ReproduceArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated seeds.
    #[arg(long, default_value = "1,2,3,4,5")]
    seeds: String,
    #[arg(long)]
    skip_calibration: bool,
    #[arg(long, default_value_t = 20)]
    lags: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Calibrate(a) => calibrate(a).map(|_| true),
        Command::Validate(a) => validate(a).map(|_| true),
        Command::Reproduce(a) => reproduce(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HAWKESLOB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("HAWKESLOB_THREADS={v:?} is not a number"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn print_counts(rows: &[CountRow]) {
    println!("{:>4} {:>8} {:>10}", "type", "hawkes", "classified");
    for r in rows {
        println!("{:>4} {:>8} {:>10}", r.event_type, r.hawkes_count, r.classified_count);
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (mut config, base) = args.common.resolve()?;
    if let Some(m) = args.model {
        config.model = m.into();
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let out = args.common.out_dir("out/simulate");
    let run = simulate_run(&config, base.as_deref())?;
    run.write_dir(&out)?;
    write_manifest(&out, "simulate", Some(config.seed), &config)?;
    println!(
        "{} seed {}: {} events, {} dropped messages -> {}",
        config.model.as_str(),
        config.seed,
        run.hawkes().len(),
        run.simulation.dropped(),
        out.display()
    );
    print_counts(&run.counts());
    Ok(())
}

fn read_classified(path: &Path, config: &RunConfig) -> Result<EventStream> {
    if !path.exists() {
        bail!("input {} does not exist", path.display());
    }
    let classified = ClassifiedStream::read_csv_path(path, config.horizon_s)?;
    Ok(classified.stream.restrict(&config.type_indices()))
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let (config, base) = args.common.resolve()?;
    let stream = read_classified(&args.input, &config)?;
    let truth = config.model_params(base.as_deref())?;
    let start = match args.start {
        StartArg::True => truth.clone(),
        StartArg::Heuristic => heuristic_start(&stream, stream.horizon, truth.dimension)?,
        StartArg::File => {
            let path = args.start_file.as_deref().context("--start file needs --start-file")?;
            load_params(path)?
        }
    };
    let mut options = FitOptions::default();
    options.optimizer.max_iters = args.max_iters;
    options.gradient = match args.gradient {
        GradientArg::Automatic => GradientMode::Automatic,
        GradientArg::FiniteDifference => GradientMode::FiniteDifference,
    };
    let result = mle_fit(&stream, stream.horizon, &start, &options)?;
    let out = args.common.out_dir("out/calibrate");
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("calibration.json"), result.to_json()?)?;
    report::write_trace(&out.join("trace.csv"), &result.trace)?;
    write_manifest(&out, "calibrate", None, &config)?;
    let dev = deviation_measures(&result.theta_hat, &truth)?;
    println!(
        "loglik {:.4} (start {:.4}), {} iterations, converged {}, {:.1}s",
        result.loglik, result.loglik_start, result.iterations, result.converged, result.elapsed_s
    );
    println!("MAE {:.4}  RMSE {:.4}  -> {}", dev.mae, dev.rmse, out.display());
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let (config, base) = args.common.resolve()?;
    let stream = read_classified(&args.input, &config)?;
    let theta_hat = load_params(&args.theta_hat)?;
    let truth = match &args.theta_true {
        Some(p) => load_params(p)?,
        None => config.model_params(base.as_deref())?,
    };
    if theta_hat.dimension != truth.dimension {
        bail!(
            "dimension mismatch: fitted parameters have {} types, generating parameters {}",
            theta_hat.dimension,
            truth.dimension
        );
    }
    let options = DiagnosticsOptions {
        lags: args.lags,
        information: true,
    };
    let report = run_diagnostics(&stream, stream.horizon, &theta_hat, Some(&truth), &options)?;
    let out = args.common.out_dir("out/validate");
    report.write_dir(&out)?;
    write_manifest(&out, "validate", None, &config)?;
    print_diagnostics(&report);
    println!("-> {}", out.display());
    Ok(())
}

fn print_diagnostics(report: &DiagnosticsReport) {
    if let Some(d) = report.deviation {
        println!("MAE {:.4}  RMSE {:.4}", d.mae, d.rmse);
    }
    println!("{:>4} {:>8} {:>8} {:>8} {:>8}", "type", "KS", "KS p", "LB", "LB p");
    for t in &report.residual_tests {
        let fmt = |r: Option<hawkeslob::diagnostics::TestResult>| {
            r.map_or(("-".to_string(), "-".to_string()), |r| {
                (format!("{:.4}", r.statistic), format!("{:.4}", r.p_value))
            })
        };
        let (ks, ks_p) = fmt(t.ks);
        let (lb, lb_p) = fmt(t.ljung_box);
        println!("{:>4} {:>8} {:>8} {:>8} {:>8}", t.event_type, ks, ks_p, lb, lb_p);
    }
    if let Some(lr) = &report.likelihood_ratio {
        println!(
            "LR {:.2} on {} df, p = {:.6e}",
            lr.test.statistic, lr.df, lr.test.p_value
        );
    }
    println!("negative variance estimates: {}", report.negative_variances);
}

fn reproduce(args: ReproduceArgs) -> Result<bool> {
    let (config, base) = args.common.resolve()?;
    let seeds: Vec<u64> = args
        .seeds
        .split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed {s:?}")))
        .collect::<Result<_>>()?;
    let out = args.common.out_dir("out/reproduce");
    std::fs::create_dir_all(&out)?;
    let mut runs = Vec::new();
    for &seed in &seeds {
        for model in InjectionModel::ALL {
            let run_config = RunConfig {
                model,
                seed,
                ..config.clone()
            };
            let dir = out.join(format!("seed-{seed}")).join(model.as_str());
            eprintln!("seed {seed} {}", model.as_str());
            runs.push(report::run_stages(
                &run_config,
                base.as_deref(),
                &dir,
                &report::StageOptions {
                    calibrate: !args.skip_calibration,
                    lags: args.lags,
                    max_iters: args.max_iters,
                },
            ));
        }
    }
    let ok = runs.iter().all(|r| r.failures.is_empty());
    report::write_report(&out, &config, &seeds, &runs)?;
    write_manifest(&out, "reproduce", seeds.first().copied(), &config)?;
    println!("report -> {}", out.join("report.md").display());
    if !ok {
        for r in runs.iter().filter(|r| !r.failures.is_empty()) {
            eprintln!("seed {} {}: {}", r.seed, r.model.as_str(), r.failures.join("; "));
        }
    }
    Ok(ok)
}
