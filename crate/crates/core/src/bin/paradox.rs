use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use paradox_core::experiments::{run_experiment, Experiment, ExperimentConfig, Mode, OneOrMany};

/// Run one model-selection experiment and write replicates.csv,
/// summary.json and meta.json into the output directory.
#[derive(Debug, Parser)]
#[command(name = "paradox", version)]
struct Cli {
    /// One of: coin, coin-scan, balance-sign, balance-var, star3-right,
    /// star3-wrong-indistinct, star4-wrong-distinct, table1, table2,
    /// decomposition-demo. May be omitted when the config file names it.
    experiment: Option<String>,

    /// TOML config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Sample sizes (repeat or comma-separate).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    n: Vec<u64>,

    #[arg(long)]
    reps: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory [default: out/<experiment>].
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads [default: $PARADOX_WORKERS, else all cores].
    #[arg(long)]
    workers: Option<usize>,

    #[arg(long, conflicts_with = "simulate")]
    exact: bool,

    #[arg(long)]
    simulate: bool,
}

fn build_config(cli: &Cli) -> paradox_core::Result<ExperimentConfig> {
    let mut config = match (&cli.config, &cli.experiment) {
        (Some(path), name) => {
            let c = ExperimentConfig::from_file(path)?;
            if let Some(name) = name {
                if Experiment::parse(name)? != c.experiment {
                    return Err(paradox_core::Error::Config(format!(
                        "experiment '{name}' does not match '{}' in {}",
                        c.experiment.name(),
                        path.display()
                    )));
                }
            }
            c
        }
        (None, Some(name)) => ExperimentConfig::new(Experiment::parse(name)?),
        (None, None) => {
            return Err(paradox_core::Error::Config("name an experiment or pass --config".into()));
        }
    };
    if !cli.n.is_empty() {
        config.n = Some(OneOrMany::Many(cli.n.clone()));
    }
    config.reps = cli.reps.or(config.reps);
    config.seed = cli.seed.unwrap_or(config.seed);
    config.output_dir = cli.out.clone().or(config.output_dir);
    config.workers = cli.workers.or(config.workers);
    if cli.exact {
        config.mode = Some(Mode::Exact);
    } else if cli.simulate {
        config.mode = Some(Mode::Simulate);
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(&cli).and_then(|c| run_experiment(&c));
    match result {
        Ok(report) => {
            println!("{} rows, {} rng draws -> {}", report.rows, report.rng_draws, report.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("paradox: {e}");
            ExitCode::FAILURE
        }
    }
}
