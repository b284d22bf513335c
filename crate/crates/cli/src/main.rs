use std::path::PathBuf;
use std::process::ExitCode;

use ajk_cli::commands::{read_selection, run_evaluate, run_simulate, run_tune, SimulateOptions};
use ajk_cli::config::{DSpec, EstimatorConfig, PeriodSpec, RunConfig};
use ajk_cli::error::{exit, CliError, Result};
use ajk_cli::parallel::{resolve_workers, RayonExecutor};
use ajk_core::simulation::SimSpec;
use ajk_core::Hyperparameters;
use clap::{Args, Parser, Subcommand};

/// Hyperparameter selection for elastic-net VARs by the artificial
/// delete-d jackknife.
#[derive(Parser)]
#[command(name = "ajk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search the hyperparameter region and write selection.json and trace.csv.
    Tune(TuneArgs),
    /// Rolling one-step evaluation of fixed hyperparameters after the tuning sample.
    Evaluate(EvaluateArgs),
    /// Write a synthetic stable VAR panel and its true parameters.
    Simulate(SimulateArgs),
}

/// Overrides shared by `tune` and `evaluate`; flags win over the file.
#[derive(Args)]
struct Common {
    /// TOML run configuration, or a JSON config / report to replay.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Last presample period, as a count or a fraction of the tuning sample.
    #[arg(long)]
    t0: Option<String>,
    /// Length of the tuning sample, as a count or a fraction of T.
    #[arg(long)]
    tune_periods: Option<String>,
    #[arg(long)]
    stride: Option<usize>,
    /// Worker threads (default: $AJK_WORKERS, else all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    common: Common,
    /// Number of random candidates.
    #[arg(long)]
    candidates: Option<usize>,
    /// insample, pseudo_oos, block_jackknife or artificial_jackknife.
    #[arg(long)]
    estimator: Option<String>,
    /// Block length for block_jackknife.
    #[arg(long)]
    q: Option<usize>,
    /// Deleted cells per pattern for artificial_jackknife, or "auto".
    #[arg(long)]
    d: Option<String>,
    /// Number of patterns for artificial_jackknife.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Take the hyperparameters from a selection.json.
    #[arg(long, conflicts_with_all = ["p", "lambda", "alpha", "beta"])]
    selection: Option<PathBuf>,
    #[arg(long, requires_all = ["lambda", "alpha", "beta"])]
    p: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    spectral_radius: f64,
    #[arg(long, default_value_t = 0.0)]
    sparsity: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_scale: f64,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    /// Fraction of cells to mark missing.
    #[arg(long, default_value_t = 0.0)]
    missing_fraction: f64,
    #[arg(long, default_value_t = 1)]
    block_len: usize,
    #[arg(long, short, default_value = ".")]
    output_dir: PathBuf,
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match (&common.config, &common.data) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(data)) => RunConfig::new(data.clone()),
        (None, None) => return Err(CliError::config("give --config or --data")),
    };
    if let Some(d) = &common.data {
        cfg.data = d.clone();
    }
    if let Some(o) = &common.output_dir {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t0) = &common.t0 {
        cfg.t0 = PeriodSpec::parse(t0)?;
    }
    if let Some(t) = &common.tune_periods {
        cfg.tune_periods = Some(PeriodSpec::parse(t)?);
    }
    if let Some(s) = common.stride {
        cfg.stride = s;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    Ok(cfg)
}

fn apply_estimator_flags(cfg: &mut RunConfig, a: &TuneArgs) -> Result<()> {
    if let Some(c) = a.candidates {
        cfg.candidates = c;
    }
    if let Some(kind) = &a.estimator {
        cfg.estimator = match kind.as_str() {
            "insample" => EstimatorConfig::Insample,
            "pseudo_oos" => EstimatorConfig::PseudoOos,
            "block_jackknife" => {
                EstimatorConfig::BlockJackknife { q: a.q.ok_or_else(|| CliError::config("block_jackknife needs --q"))? }
            }
            "artificial_jackknife" => match cfg.estimator {
                e @ EstimatorConfig::ArtificialJackknife { .. } => e,
                _ => EstimatorConfig::default(),
            },
            other => return Err(CliError::config(format!("unknown estimator '{other}'"))),
        };
    }
    if let EstimatorConfig::BlockJackknife { q } = &mut cfg.estimator {
        if let Some(v) = a.q {
            *q = v;
        }
    }
    if let EstimatorConfig::ArtificialJackknife { d, m, .. } = &mut cfg.estimator {
        if let Some(v) = &a.d {
            *d = if v == "auto" {
                DSpec::Auto
            } else {
                DSpec::Fixed(v.parse().map_err(|_| CliError::config(format!("--d '{v}' is not an integer or auto")))?)
            };
        }
        if let Some(v) = a.m {
            *m = v;
        }
    } else if a.d.is_some() || a.m.is_some() {
        return Err(CliError::config("--d and --m apply only to artificial_jackknife"));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tune(a) => {
            let mut cfg = base_config(&a.common)?;
            apply_estimator_flags(&mut cfg, &a)?;
            let exec = RayonExecutor::new(resolve_workers(cfg.workers)?)?;
            let (out, files) = run_tune(&cfg, &exec)?;
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            let s = &out.report.selection;
            println!(
                "selected p={} lambda={} alpha={} beta={} error={} ({} of {} candidates failed)",
                s.gamma.p,
                s.gamma.lambda,
                s.gamma.alpha,
                s.gamma.beta,
                s.error,
                out.report.failed_candidates,
                out.report.candidates
            );
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Evaluate(a) => {
            let cfg = base_config(&a.common)?;
            let hyper = match (&a.selection, a.p, a.lambda, a.alpha, a.beta) {
                (Some(path), ..) => read_selection(path)?,
                (None, Some(p), Some(l), Some(al), Some(b)) => Hyperparameters::new(p, l, al, b)?,
                _ => return Err(CliError::config("give --selection or all of --p --lambda --alpha --beta")),
            };
            let (out, files) = run_evaluate(&cfg, &hyper)?;
            let r = &out.report;
            let rel = r.relative_weighted_mse.map_or("n/a".to_string(), |v| v.to_string());
            println!("weighted MSE {} (random walk {}, relative {rel})", r.weighted_mse, r.random_walk_weighted_mse);
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Simulate(a) => {
            let spec = SimSpec {
                n: a.n,
                p: a.p,
                t: a.t,
                spectral_radius: a.spectral_radius,
                sparsity: a.sparsity,
                sigma_scale: a.sigma_scale,
                burn_in: a.burn_in,
                seed: a.seed,
            };
            let opts = SimulateOptions { spec, missing_fraction: a.missing_fraction, block_len: a.block_len };
            for f in run_simulate(&opts, &a.output_dir)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
