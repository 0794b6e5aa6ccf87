use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vblab::harness::{
    emit, emit_to, fit_rate_exponent, run_curve, run_divcheck, run_experiment, run_pc_compare, Emit,
    ExperimentConfig, Format, GsmMetric, GsmSignalSpec, ModelSpec,
};
use vblab::{Error, Result};

/// Monte Carlo experiments for variational posteriors.
#[derive(Parser)]
#[command(name = "vblab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Divergence chain and Rényi monotonicity on random discrete pairs.
    Divcheck(Common),
    /// Mean risk of the sequence-model VB posterior against n.
    GsmRate(Common),
    /// Mean selected dimension against n (forces the `dimension` metric).
    GsmDim(Common),
    /// Risk under the spike adversary (forces the `lower_bound_spike` signal).
    GsmLower(Common),
    /// Fitted and theoretical exponents of the truncated-Gaussian VB risk, or the
    /// exact risk table for a `trunc_gauss` config.
    TruncCurve(Common),
    /// Mean-field and Markov-chain risks for the change-point model.
    PcCompare(Common),
    /// Hellinger risk of the selected mixture fit against n.
    MixFit(Common),
    /// Hellinger risk of the Gaussian mean-field fit for the exponential family.
    ExpfamFit(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; falls back to the config's `output`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn default_config(cmd: &Command) -> serde_json::Value {
    let gsm_grid: Vec<u64> = (8..=14).map(|e| 1u64 << e).collect();
    let gaussian = json!({"kind": "gaussian", "variance": 1.0, "tau": 1.0});
    match cmd {
        Command::Divcheck(_) => json!({
            "model": {"kind": "divergence", "pairs": 10000, "min_size": 2, "max_size": 64},
        }),
        Command::GsmRate(_) | Command::GsmDim(_) => json!({
            "model": {"kind": "gsm", "alpha": 1.0, "radius": 2.0, "prior": gaussian,
                      "signal": {"kind": "sobolev_boundary"}},
            "n_grid": gsm_grid, "replications": 50,
        }),
        Command::GsmLower(_) => json!({
            "model": {"kind": "gsm", "alpha": 1.0, "radius": 2.0, "prior": gaussian,
                      "signal": {"kind": "lower_bound_spike"}},
            "n_grid": [1024, 2048, 4096], "replications": 50,
        }),
        Command::TruncCurve(_) => json!({
            "model": {"kind": "trunc_curve", "alpha": 1.0, "beta": 1.0,
                      "t_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]},
            "n_grid": (10..=16).map(|e| 1u64 << e).collect::<Vec<_>>(),
        }),
        Command::PcCompare(_) => json!({
            "model": {"kind": "piecewise", "sigma": 1.0, "bound": 1.0, "k_star": 4,
                      "method": {"kind": "markov", "c": 1.0}, "grid_points": 64},
            "n_grid": (7..=12).map(|e| 1u64 << e).collect::<Vec<_>>(), "replications": 100,
        }),
        Command::MixFit(_) => json!({
            "model": {"kind": "mixture", "means": [-3.0, 3.0], "weights": [0.5, 0.5], "sigma": 0.5,
                      "k_candidates": [1, 2, 3, 4]},
            "n_grid": [200, 400, 800, 1600], "replications": 20,
        }),
        Command::ExpfamFit(_) => json!({
            "model": {"kind": "expfam", "theta_star": [0.8, -0.5, 0.3, 0.2], "k": 4},
            "n_grid": [200, 800, 3200], "replications": 20,
        }),
    }
}

fn load_config(cmd: &Command, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::from_json(&default_config(cmd).to_string())?,
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    let expected = match cmd {
        Command::Divcheck(_) => matches!(cfg.model, ModelSpec::Divergence { .. }),
        Command::GsmRate(_) | Command::GsmDim(_) | Command::GsmLower(_) => matches!(cfg.model, ModelSpec::Gsm { .. }),
        Command::TruncCurve(_) => matches!(cfg.model, ModelSpec::TruncCurve { .. } | ModelSpec::TruncGauss { .. }),
        Command::PcCompare(_) => matches!(cfg.model, ModelSpec::Piecewise { .. }),
        Command::MixFit(_) => matches!(cfg.model, ModelSpec::Mixture { .. }),
        Command::ExpfamFit(_) => matches!(cfg.model, ModelSpec::Expfam { .. }),
    };
    if !expected {
        return Err(Error::Config("config model does not match the subcommand".into()));
    }
    if let ModelSpec::Gsm { metric, signal, .. } = &mut cfg.model {
        match cmd {
            Command::GsmDim(_) => *metric = GsmMetric::Dimension,
            Command::GsmLower(_) => *signal = GsmSignalSpec::LowerBoundSpike,
            _ => {}
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out<T: Emit + ?Sized>(item: &T, format: Format, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => emit(item, format, p),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit_to(item, format, &mut lock)?;
            lock.flush().map_err(|source| Error::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cmd = &cli.command;
    let common = match cmd {
        Command::Divcheck(c)
        | Command::GsmRate(c)
        | Command::GsmDim(c)
        | Command::GsmLower(c)
        | Command::TruncCurve(c)
        | Command::PcCompare(c)
        | Command::MixFit(c)
        | Command::ExpfamFit(c) => c,
    };
    let cfg = load_config(cmd, common)?;
    let out = common.out.clone().or_else(|| cfg.output.clone());
    let out = out.as_deref();
    match cmd {
        Command::Divcheck(_) => {
            let summary = run_divcheck(&cfg)?;
            write_out(&summary, common.format, out)?;
            if summary.chain_violations + summary.monotonicity_violations > 0 {
                return Err(Error::Numeric(format!(
                    "{} chain and {} monotonicity violations",
                    summary.chain_violations, summary.monotonicity_violations
                )));
            }
        }
        Command::TruncCurve(_) if matches!(cfg.model, ModelSpec::TruncCurve { .. }) => {
            write_out(&run_curve(&cfg)?, common.format, out)?
        }
        Command::PcCompare(_) => write_out(&run_pc_compare(&cfg)?, common.format, out)?,
        _ => {
            let table = run_experiment(&cfg)?;
            write_out(&table, common.format, out)?;
            if table.rows.len() >= 3 {
                let loglog = matches!(cmd, Command::GsmRate(_));
                if let Ok(fit) = fit_rate_exponent(&table, loglog) {
                    eprintln!(
                        "slope {:.4}, r^2 {:.4}{}",
                        fit.slope,
                        fit.r_squared,
                        fit.loglog_coefficient.map(|c| format!(", log log n coefficient {c:.4}")).unwrap_or_default()
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
