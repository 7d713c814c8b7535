use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use firesale::config::{case_names, ExperimentConfig};
use firesale::eval::EvalReport;
use firesale::net::Variant;
use firesale::pipeline;

#[derive(Parser)]
#[command(name = "firesale", version, about = "Fire-sale contagion simulation and inverse demand learning")]
struct Cli {
    /// Experiment config: a TOML file or a shipped case name.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for dataset generation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate equilibria and write the dataset with its metadata sidecar.
    GenData,
    /// Train one model variant on a generated dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the config's model.variant.
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Evaluate a model on the held-out split and write report files.
    Eval {
        #[arg(long, required_unless_present = "oracle")]
        model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Evaluate the ground truth instead of a model.
        #[arg(long, conflicts_with = "model")]
        oracle: bool,
    },
    /// Export the reconstructed inverse demand curve.
    Curve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Generate, train every variant and evaluate one case study.
    Repro {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(case_names()))]
        case: String,
    },
}

fn load_config(cli: &Cli, fallback: Option<&str>) -> Result<ExperimentConfig> {
    let name = cli
        .config
        .as_deref()
        .or(fallback)
        .context("--config is required (a TOML file or one of the case names)")?;
    let path = Path::new(name);
    let cfg = if path.exists() || name.ends_with(".toml") {
        ExperimentConfig::load(path)?
    } else {
        ExperimentConfig::preset(name)?
    };
    Ok(match cli.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn print_report(report: &EvalReport) {
    println!("model {} on {} held-out samples", report.model, report.samples);
    println!("  MSE (sum)        {:.4e}", report.mse_sum);
    for (j, mse) in report.mse_per_asset.iter().enumerate() {
        let corr = report.correlation.as_ref().map_or("n/a".into(), |c| format!("{:.5}", c[j]));
        let mae = report.scaled_mae.as_ref().map_or("n/a".into(), |c| format!("{:.4}", c[j]));
        println!("  asset {}: MSE {mse:.4e}  corr {corr}  scaled MAE {mae}", j + 1);
    }
    println!("  curve max error  {:.4}", report.curve_max_error);
    if let Some(block) = &report.regression {
        let r = &block.result;
        println!("  regression (dof {}):", r.dof);
        for k in 0..r.estimates.len() {
            println!(
                "    {:<22} {:>9.5} se {:.5}  p(true) {:.3}  p(zero) {:.3e}",
                r.names[k], r.estimates[k], r.standard_errors[k], block.true_null.p_values[k], block.zero_null.p_values[k]
            );
        }
    }
    for note in &report.notes {
        println!("  note: {note}");
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::GenData => {
            let cfg = load_config(&cli, None)?;
            let out = pipeline::gen_data(&cfg, &cli.out)?;
            println!("wrote {} rows to {}", out.meta.rows, out.dataset.display());
        }
        Command::Train { data, variant } => {
            let cfg = load_config(&cli, None)?;
            let variant = variant.unwrap_or(cfg.model.variant);
            let start = Instant::now();
            let out = pipeline::train_variant(&cfg, variant, data, &cli.out)?;
            println!(
                "trained {variant} in {:.1}s: best epoch {} of {}, validation MSE {:.4e}",
                start.elapsed().as_secs_f64(),
                out.report.best_epoch,
                out.report.history.len(),
                out.report.best_val_mse
            );
            println!("model written to {}", out.model_path.display());
        }
        Command::Eval { model, data, oracle } => {
            let report = if *oracle {
                pipeline::eval_oracle(data, &cli.out)?
            } else {
                pipeline::eval_model(model.as_deref().expect("clap enforces --model"), data, &cli.out)?
            };
            print_report(&report);
        }
        Command::Curve { model, data } => {
            let path = pipeline::curve(model, data, &cli.out)?;
            println!("curve written to {}", path.display());
        }
        Command::Repro { case } => {
            let cfg = load_config(&cli, Some(case))?;
            let start = Instant::now();
            let summary = pipeline::repro(&cfg, &cli.out)?;
            println!("{}", summary.comparison_table());
            println!("finished {case} in {:.1}s; artifacts in {}", start.elapsed().as_secs_f64(), cli.out.display());
        }
    }
    Ok(())
}

/// 1: I/O or missing artifact, 2: contract or validation, 3: numerical.
fn exit_code(err: &anyhow::Error) -> u8 {
    use firesale::Error as E;
    fn code(e: &E) -> u8 {
        match e {
            E::Io { .. } | E::Format { .. } => 1,
            E::Numerical(_) | E::NonConvergence { .. } => 3,
            E::Sample { source, .. } => code(source),
            _ => 2,
        }
    }
    err.chain()
        .find_map(|c| c.downcast_ref::<E>())
        .map_or(2, code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
