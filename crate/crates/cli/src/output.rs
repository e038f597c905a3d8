use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

/// Output directory; every file is written to a temporary sibling first and
/// renamed into place.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
    ) -> Result<PathBuf, CliError> {
        let target = self.path(name);
        let tmp = NamedTempFile::new_in(&self.root).map_err(|e| CliError::io(&self.root, e))?;
        let mut w = BufWriter::new(tmp);
        body(&mut w)?;
        let tmp = w.into_inner().map_err(|e| CliError::io(&target, e.into_error()))?;
        tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
        Ok(target)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(bohmflow::Error::from)?;
            writeln!(w).map_err(|e| CliError::io(name, e))
        })
    }
}
