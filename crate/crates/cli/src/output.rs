//! Output files that disappear again unless the command succeeds.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Tracks files written by one command. Dropping it without calling
/// [`Outputs::commit`] deletes every file written so far, and any directory
/// it had to create.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    created_dirs: Vec<PathBuf>,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        let mut out = Outputs { dir: dir.to_path_buf(), created_dirs: Vec::new(), written: Vec::new(), committed: false };
        out.ensure_dir(dir)?;
        Ok(out)
    }

    fn ensure_dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        self.created_dirs.extend(missing.into_iter().rev());
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` inside the output directory.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        self.write_path(&path, contents)?;
        Ok(path)
    }

    /// Writes to an explicit path, creating its parent directory if needed.
    pub fn write_path(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(parent) = path.parent() {
            self.ensure_dir(parent)?;
        }
        self.written.push(path.to_path_buf());
        std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.written {
            let _ = std::fs::remove_file(f);
        }
        for d in self.created_dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}
