use std::path::PathBuf;
use std::process::ExitCode;

use bqstab_cli::{run_to_dir, CliError, ExperimentConfig, ExperimentKind};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bqstab", version, about = "Bayesian quadrature weight-stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV tables plus manifest.json.
    Run {
        #[arg(long, value_enum)]
        experiment: ExperimentKind,
        /// JSON config; every field is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; defaults to the config's `output_dir`, then `out/<experiment>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Use every size in the positivity sweep instead of the default stride.
        #[arg(long)]
        full: bool,
    },
    /// Parse and validate a config, printing it with defaults filled in.
    ValidateConfig { file: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { experiment, config, out, seed, full } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::default(),
            };
            if cfg.experiment.is_some_and(|e| e != experiment) {
                return Err(CliError::Config(format!(
                    "config names experiment {} but --experiment is {experiment}",
                    cfg.experiment.expect("checked")
                )));
            }
            cfg.experiment = Some(experiment);
            if seed.is_some() {
                cfg.seed = seed;
            }
            let dir = out
                .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
            cfg.output_dir = Some(dir.display().to_string());
            let resolved = cfg.resolve(full)?;
            let manifest = run_to_dir(&resolved, &dir)?;
            for f in &manifest.files {
                println!("{}  {} ({} rows)", f.sha256, dir.join(&f.name).display(), f.rows);
            }
            println!("wall time {:.2}s", manifest.wall_time_seconds);
            if manifest.failed_rows > 0 {
                return Err(CliError::FailedRows(manifest.failed_rows));
            }
            Ok(())
        }
        Command::ValidateConfig { file } => {
            let cfg = ExperimentConfig::from_file(&file)?;
            println!("{}", cfg.resolve(false)?.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bqstab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
