use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Output files are written under a staging directory and only moved into
/// place by [`Staged::commit`]. Dropping without committing leaves the
/// destination untouched.
pub struct Staged {
    dest: PathBuf,
    staging: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Staged {
    pub fn new(dest: &Path) -> Result<Self> {
        fs::create_dir_all(dest).with_context(|| format!("creating {}", dest.display()))?;
        let staging = dest.join(format!(".staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).ok();
        }
        fs::create_dir_all(&staging).with_context(|| format!("creating {}", staging.display()))?;
        Ok(Staged {
            dest: dest.to_path_buf(),
            staging,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.staging.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let to = self.dest.join(rel);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(self.staging.join(rel), &to).with_context(|| format!("moving output to {}", to.display()))?;
            out.push(to);
        }
        self.committed = true;
        fs::remove_dir_all(&self.staging).ok();
        Ok(out)
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            fs::remove_dir_all(&self.staging).ok();
        }
    }
}
