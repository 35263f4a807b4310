//! Experiment harness for the `bqstab` library: reproduces the figure
//! experiments as CSV tables plus a JSON manifest.
//!
//! ```no_run
//! use bqstab_cli::{run_to_dir, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::from_json(r#"{"experiment": "fig4_runge"}"#).unwrap();
//! let manifest = run_to_dir(&cfg.resolve(false).unwrap(), "out/fig4".as_ref()).unwrap();
//! println!("{} files", manifest.files.len());
//! ```

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::Path;
use std::time::Instant;

pub use config::{DesignSource, ExperimentConfig, ExperimentKind};
pub use error::{CliError, Result};
pub use experiments::{run_experiment, task_seed, RunOutput};
pub use output::{Manifest, Table};

/// Runs a resolved configuration and writes its tables and manifest to `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let start = Instant::now();
    let out = run_experiment(cfg)?;
    let files = output::write_tables(dir, &out.tables)?;
    let manifest = Manifest {
        experiment: cfg.kind()?.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        files,
        failed_rows: out.failed_rows,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    output::write_manifest(dir, &manifest)?;
    Ok(manifest)
}
