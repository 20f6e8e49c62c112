//! All-or-nothing output directories: results are written into a hidden
//! sibling and renamed into place only once complete.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::TempDir;

pub struct Staged {
    tmp: TempDir,
    dest: PathBuf,
}

impl Staged {
    pub fn new(dest: &Path) -> Result<Self> {
        if dest.exists() && std::fs::read_dir(dest).map(|mut d| d.next().is_some()).unwrap_or(true) {
            anyhow::bail!(crate::CliError::Usage(format!(
                "{} exists and is not empty",
                dest.display()
            )));
        }
        let parent = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let tmp = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(&parent)
            .with_context(|| format!("staging in {}", parent.display()))?;
        Ok(Self {
            tmp,
            dest: dest.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    /// Moves the staged tree to its destination. Dropping without commit
    /// deletes it.
    pub fn commit(self) -> Result<()> {
        if self.dest.exists() {
            std::fs::remove_dir(&self.dest).with_context(|| format!("replacing {}", self.dest.display()))?;
        }
        let staged = self.tmp.keep();
        std::fs::rename(&staged, &self.dest).with_context(|| format!("moving results to {}", self.dest.display()))
    }
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
