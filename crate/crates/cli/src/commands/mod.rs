pub mod aggregate;
pub mod fit;
pub mod placebo;
pub mod power;
pub mod report;
pub mod simulate;

use crate::config::StudyConfig;
use crate::error::CliError;
use crate::Cli;
use std::path::{Path, PathBuf};

/// Config named by `--config`, its raw bytes and its directory.
pub(crate) struct Loaded {
    pub config: StudyConfig,
    pub bytes: Vec<u8>,
    pub dir: PathBuf,
}

pub(crate) fn load_config(cli: &Cli, required: bool) -> Result<Option<Loaded>, CliError> {
    let Some(path) = &cli.config else {
        return if required {
            Err(CliError::Config("--config is required for this command".into()))
        } else {
            Ok(None)
        };
    };
    let (mut config, bytes) = StudyConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.solver.seed = seed;
        if let Some(sim) = config.simulate.as_mut() {
            sim.seed = seed;
        }
    }
    let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok(Some(Loaded { config, bytes, dir }))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path.display(), e))
}

pub(crate) fn note(cli: &Cli, msg: impl AsRef<str>) {
    if cli.verbose {
        eprintln!("{}", msg.as_ref());
    }
}
