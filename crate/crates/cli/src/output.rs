//! Output plumbing: reproducibility headers, CSV/JSON sinks, and the
//! default-output-directory environment variable.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

pub const OUT_DIR_ENV: &str = "ROUGHBEL_OUT_DIR";

/// Resolve `--out`: relative paths land in `$ROUGHBEL_OUT_DIR` when set.
pub fn resolve_out_path(out: &Path) -> PathBuf {
    if out.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(out);
            }
        }
    }
    out.to_path_buf()
}

/// Either a file or stdout.
pub struct Sink {
    inner: Box<dyn Write>,
}

impl Sink {
    pub fn open(out: Option<&Path>) -> Result<Self, CliError> {
        let inner: Box<dyn Write> = match out {
            None => Box::new(std::io::stdout().lock()),
            Some(p) => {
                let path = resolve_out_path(p);
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent).map_err(|e| {
                            CliError::Config(format!("cannot create {}: {e}", parent.display()))
                        })?;
                    }
                }
                Box::new(std::fs::File::create(&path).map_err(|e| {
                    CliError::Config(format!("cannot create {}: {e}", path.display()))
                })?)
            }
        };
        Ok(Self { inner })
    }

    /// Reproducibility header: version, config hash, seed, canonical config.
    pub fn header(&mut self, config: &RunConfig) -> Result<(), CliError> {
        let seed = config.get("seed").unwrap_or("-");
        writeln!(self.inner, "# roughbel {}", env!("CARGO_PKG_VERSION"))
            .and_then(|_| writeln!(self.inner, "# config_sha256={}", config.hash()))
            .and_then(|_| writeln!(self.inner, "# seed={seed}"))
            .and_then(|_| writeln!(self.inner, "# config={}", config.canonical()))
            .map_err(io_err)
    }

    pub fn line(&mut self, line: &str) -> Result<(), CliError> {
        writeln!(self.inner, "{line}").map_err(io_err)
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("write failed: {e}"))
}

/// Shortest round-trip decimal formatting for CSV fields.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}
