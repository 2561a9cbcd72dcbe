//! Output directories and their run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eegalign_core::data::Manifest;

use crate::error::{CliError, CliResult};

pub const RUN_MANIFEST: &str = "manifest.txt";

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// Creates `dir`, refusing a non-empty one unless `force` is set. Forced
/// runs overwrite the files they write and leave any others alone.
pub fn prepare_out(dir: &Path, force: bool) -> CliResult<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(CliError::Usage(format!(
                "output directory {} is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

/// Run provenance. Wall-clock is the only field that varies between
/// identical runs.
pub struct RunManifest {
    entries: Manifest,
    start: Instant,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut entries = Manifest::new();
        entries
            .set("command", command)
            .set("version", version_string());
        RunManifest {
            entries,
            start: Instant::now(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.set(key, value);
        self
    }

    pub fn path(&mut self, key: &str, path: &Path) -> &mut Self {
        self.entries.set(key, path.display());
        self
    }

    /// Appends the run keys to `base` (a dataset manifest, say) and writes
    /// the result as the directory's single manifest.
    pub fn write_merged(&self, dir: &Path, base: &Manifest) -> CliResult<()> {
        let mut m = base.clone();
        for (k, v) in self.entries.entries() {
            m.set(k.as_str(), v);
        }
        m.set(
            "wall_clock_s",
            format!("{:.3}", self.start.elapsed().as_secs_f64()),
        );
        m.write(dir.join(RUN_MANIFEST))?;
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        self.write_merged(dir, &Manifest::new())
    }
}
