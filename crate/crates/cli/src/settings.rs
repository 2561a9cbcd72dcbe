//! Values from flags, a `key=value` config file, and defaults, in that
//! order of precedence. Keys are the long flag names.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use eegalign_core::data::Manifest;

use crate::error::{CliError, CliResult};

pub struct Settings {
    file: Manifest,
    used: RefCell<BTreeSet<String>>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let file = match path {
            Some(p) => Manifest::read(p)
                .map_err(|e| CliError::Usage(format!("config file {}: {e}", p.display())))?,
            None => Manifest::new(),
        };
        Ok(Settings {
            file,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn lookup<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.used.borrow_mut().insert(key.to_owned());
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{raw}'"))),
        }
    }

    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        let file = self.lookup(key)?;
        Ok(flag.or(file).unwrap_or(default))
    }

    /// A boolean switch: set by the flag, or by `key=true` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.lookup::<bool>(key)?.unwrap_or(false))
    }

    /// Comma-separated list in the file; flags replace it entirely.
    pub fn list(&self, flag: &[String], key: &str) -> CliResult<Vec<String>> {
        let file: Option<String> = self.lookup(key)?;
        if !flag.is_empty() {
            return Ok(flag.to_vec());
        }
        Ok(file
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default())
    }

    /// Call after all lookups: any file key never asked for is a typo.
    pub fn finish(&self) -> CliResult<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .file
            .entries()
            .iter()
            .map(|(k, _)| k.as_str())
            .filter(|k| !used.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )))
        }
    }
}
