//! Flat key-value configuration: file loading, canonical serialisation, and
//! the reproducibility hash embedded in every output artifact.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::CliError;

/// Key-value pairs loaded from a `--config` file (`key = value` lines,
/// `#` comments). CLI flags take precedence over file values.
#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    /// Parsed value for `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::Config(format!("config key '{key}': cannot parse '{raw}'"))
            }),
        }
    }
}

/// Effective configuration of one run, in canonical (sorted) order.
#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(subcommand: &str) -> Self {
        let mut c = Self::default();
        c.put("subcommand", subcommand);
        c
    }

    pub fn put(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Canonical serialisation: sorted `key=value` joined by `;`.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut s = String::with_capacity(16);
        for b in digest.iter().take(8) {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// CLI value > config-file value > default.
pub fn resolve<T: FromStr + Clone>(
    cli: Option<T>,
    file: &ConfigMap,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = cli {
        return Ok(v);
    }
    Ok(file.get::<T>(key)?.unwrap_or(default))
}

pub fn resolve_opt<T: FromStr + Clone>(
    cli: Option<T>,
    file: &ConfigMap,
    key: &str,
) -> Result<Option<T>, CliError> {
    if cli.is_some() {
        return Ok(cli);
    }
    file.get::<T>(key)
}
