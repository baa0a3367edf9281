//! Output directories that appear only once complete.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Files are written into a hidden sibling directory, which is renamed onto
/// the target on [`Staged::commit`]. Dropping without committing removes it.
pub struct Staged {
    target: PathBuf,
    tmp: PathBuf,
    committed: bool,
}

impl Staged {
    pub fn new(target: &Path) -> Result<Staged> {
        check_target(target)?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
        let name = target
            .file_name()
            .with_context(|| format!("output path {} has no final component", target.display()))?
            .to_string_lossy();
        let tmp = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        Ok(Staged {
            target: target.to_path_buf(),
            tmp,
            committed: false,
        })
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<fs::File>> {
        let path = self.tmp.join(name);
        let file =
            fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        // an empty directory may stand in the way; anything else was refused in `new`
        if self.target.is_dir() {
            fs::remove_dir(&self.target).with_context(|| {
                format!(
                    "output directory {} is no longer empty",
                    self.target.display()
                )
            })?;
        }
        fs::rename(&self.tmp, &self.target)
            .with_context(|| format!("cannot move output into {}", self.target.display()))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

/// Refuses targets that exist, unless they are an empty directory.
pub fn check_target(target: &Path) -> Result<()> {
    if !target.exists() {
        return Ok(());
    }
    if target.is_dir() && fs::read_dir(target)?.next().is_none() {
        return Ok(());
    }
    bail!(
        "output directory {} already exists and is not empty",
        target.display()
    )
}
