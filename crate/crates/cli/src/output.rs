use crate::error::CliError;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Output directory of one run.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Runs `body` against a buffered writer for `name`.
    pub fn write<F, E>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), E>,
        E: std::fmt::Display,
    {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(path.display(), e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| CliError::io(path.display(), e))?;
        w.flush().map_err(|e| CliError::io(path.display(), e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w).map_err(serde_json::Error::io)
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
