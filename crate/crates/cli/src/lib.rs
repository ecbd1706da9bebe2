//! Config-driven experiment runner. The `dfcrb` binary is a thin clap layer
//! over [`execute`].

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};

pub use commands::{Overrides, Subcommand};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};

/// Loads `config_path`, runs `cmd` and writes its artifacts. `out` replaces
/// the configured output directory. Returns the directory written.
pub fn execute(
    cmd: Subcommand,
    config_path: &Path,
    out: Option<&Path>,
    overrides: &Overrides,
) -> Result<(PathBuf, artifacts::Manifest)> {
    let (cfg, bytes) = ExperimentConfig::load(config_path)?;
    if let Some(levels) = &overrides.snr_db {
        let mut check = cfg.scenario.clone();
        check.snr_db = levels.clone();
        check.noise_power = None;
        let mut probe = cfg.clone();
        probe.scenario = check;
        probe.validate()?;
    }
    let tables = commands::run(cmd, &cfg, overrides)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let seed = commands::effective_seed(cmd, &cfg, overrides);
    let manifest = artifacts::write_all(&dir, cmd.as_str(), &bytes, seed, &tables)?;
    Ok((dir, manifest))
}
