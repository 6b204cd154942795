use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use streamlabel_core::harness::{
    canned_figure, emit_outputs, run_ablation, run_experiment, run_figure, summarize, thread_limit,
    Execution, ExperimentConfig, FIGURE_IDS,
};
use streamlabel_core::Error;

#[derive(Parser)]
#[command(
    name = "streamlabel",
    version,
    about = "Cost-aware streaming label experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write CSV/SVG outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's output_dir, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the config's seeds with N consecutive seeds.
        #[arg(long)]
        trials: Option<usize>,
        /// First seed when regenerating seeds.
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Run a canned figure configuration.
    Repro {
        #[arg(value_name = "FIGURE_ID", help = format!("one of: {}", FIGURE_IDS.join(", ")))]
        figure: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dataset directory for fig4 / fig5.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Override the number of seeds per run.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Sweep lambda over a grid for one config.
    AblateLambda {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated lambda values, e.g. 0.25,0.5,1
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    /// Errors from a run are runtime failures unless they are config errors.
    fn from_run(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn reseed(config: &mut ExperimentConfig, trials: Option<usize>, seed_base: Option<u64>) {
    if trials.is_none() && seed_base.is_none() {
        return;
    }
    let n = trials.unwrap_or(config.trial_seeds.len());
    let base = seed_base.unwrap_or(config.trial_seeds.first().copied().unwrap_or(0));
    config.trial_seeds = (0..n as u64).map(|i| base + i).collect();
}

fn parse_grid(grid: &str) -> Result<Vec<f64>, Failure> {
    grid.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .ok_or_else(|| {
                    Failure::Config(format!("grid entry `{s}` is not a positive number"))
                })
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|g| {
            if g.is_empty() {
                Err(Failure::Config("grid is empty".into()))
            } else {
                Ok(g)
            }
        })
}

fn run(
    config_path: &Path,
    out: Option<PathBuf>,
    trials: Option<usize>,
    seed_base: Option<u64>,
) -> Result<(), Failure> {
    let mut config = ExperimentConfig::load(config_path).map_err(config_err)?;
    reseed(&mut config, trials, seed_base);
    config.check_inputs().map_err(config_err)?;
    let dir = out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&config.name));
    let results = run_experiment(&config).map_err(Failure::from_run)?;
    for f in &results.failures {
        eprintln!(
            "trial {} (seed {}) aborted at round {}: {}",
            f.index, f.seed, f.round, f.message
        );
    }
    if results.trials.is_empty() {
        return Err(Failure::Runtime("every trial aborted".into()));
    }
    let written = emit_outputs(&results, &dir).map_err(Failure::from_run)?;
    let summary = summarize(&results.trials).map_err(Failure::from_run)?;
    let t = summary.average_loss.len() - 1;
    println!(
        "{}: {} trials, T = {}, mean L_T/T = {} +- {}, mean N_T = {}",
        config.name,
        results.trials.len(),
        t + 1,
        summary.average_loss.mean[t],
        summary.average_loss.half_width[t],
        summary.mean_labels[t]
    );
    println!("wrote {} files to {}", written.len(), dir.display());
    if results.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "{} trial(s) aborted",
            results.failures.len()
        )))
    }
}

fn repro(
    figure: &str,
    out: Option<PathBuf>,
    data: Option<PathBuf>,
    trials: Option<usize>,
) -> Result<(), Failure> {
    let mut fig = canned_figure(figure, data.as_deref()).map_err(config_err)?;
    if let Some(n) = trials {
        if n == 0 {
            return Err(Failure::Config("--trials must be >= 1".into()));
        }
        for panel in &mut fig.panels {
            for r in &mut panel.runs {
                reseed(&mut r.config, Some(n), None);
            }
        }
    }
    let dir = out.unwrap_or_else(|| Path::new("repro").join(figure));
    let written = run_figure(&fig, &dir, Execution::Parallel).map_err(Failure::from_run)?;
    println!(
        "{figure}: wrote {} files to {}",
        written.len(),
        dir.display()
    );
    Ok(())
}

fn ablate(config_path: &Path, grid: &str, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = ExperimentConfig::load(config_path).map_err(config_err)?;
    config.check_inputs().map_err(config_err)?;
    let grid = parse_grid(grid)?;
    let dir = out.unwrap_or_else(|| Path::new("out").join(format!("{}-lambda", config.name)));
    let written =
        run_ablation(&config, &grid, &dir, Execution::Parallel).map_err(Failure::from_run)?;
    println!("wrote {} files to {}", written.len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = thread_limit()
        .map_err(config_err)
        .and_then(|_| match cli.command {
            Command::Run {
                config,
                out,
                trials,
                seed_base,
            } => run(&config, out, trials, seed_base),
            Command::Repro {
                figure,
                out,
                data,
                trials,
            } => repro(&figure, out, data, trials),
            Command::AblateLambda { config, grid, out } => ablate(&config, &grid, out),
        });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(3)
        }
    }
}
