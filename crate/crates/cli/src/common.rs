//! Shared CLI plumbing: flag/config-file resolution, config hashing, run
//! directories, and exit-code mapping.
//!
//! Exit codes: 0 success, 2 usage/validation error, 3 invariant breach
//! (always accompanied by a machine-readable JSON error on stderr carrying
//! the stream key needed to replay the offending replicate).

use anyhow::Context;
use clap::Args;
use erw_core::rng::StreamKey;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Master seed for all replicate streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for replicate sweeps (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Run directory for report files (default: runs/<command>-<unix-ms>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Optional JSON config file; explicit flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Parsed --config file, queried field by field.
pub struct FileCfg(Option<Value>);

impl FileCfg {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(FileCfg(None)),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                let value: Value = serde_json::from_str(&text).map_err(|e| {
                    CliError::Usage(format!("config {} is not valid JSON: {e}", p.display()))
                })?;
                if !value.is_object() {
                    return Err(CliError::Usage(format!(
                        "config {} must be a JSON object",
                        p.display()
                    )));
                }
                Ok(FileCfg(Some(value)))
            }
        }
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        match &self.0 {
            None => Ok(None),
            Some(v) => match v.get(key) {
                None => Ok(None),
                Some(field) => serde_json::from_value(field.clone())
                    .map(Some)
                    .map_err(|e| CliError::Usage(format!("config field '{key}': {e}"))),
            },
        }
    }
}

/// Flag value, else config-file value, else default, else usage error.
pub fn resolve<T: DeserializeOwned>(
    flag: Option<T>,
    file: &FileCfg,
    key: &str,
    default: Option<T>,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = file.get(key)? {
        return Ok(v);
    }
    default.ok_or_else(|| CliError::Usage(format!("missing required parameter '{key}'")))
}

/// First 16 hex chars of the SHA-256 of the resolved config's canonical JSON.
/// Excludes thread count and output paths: only inputs that determine the
/// report contents are hashed.
pub fn config_hash<T: Serialize>(resolved: &T) -> String {
    let canonical = serde_json::to_string(resolved).expect("config serialization cannot fail");
    let digest = Sha256::digest(canonical.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Creates (and returns) the run directory: `--out` verbatim when given,
/// otherwise a fresh timestamped directory under ./runs. Reports are only
/// ever written into this run's own directory; prior runs are never touched.
pub fn run_dir(common: &CommonArgs, command: &str) -> Result<PathBuf, CliError> {
    let dir = common.out.clone().unwrap_or_else(|| {
        let ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        PathBuf::from("runs").join(format!("{command}-{ms}"))
    });
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating run directory {}", dir.display()))
        .map_err(CliError::Other)?;
    Ok(dir)
}

pub fn threads_from(
    common: &CommonArgs,
    file: &FileCfg,
) -> Result<erw_core::exec::Threads, CliError> {
    let n: usize = resolve(common.threads, file, "threads", Some(0))?;
    Ok(erw_core::exec::Threads::from_count(n))
}

pub fn seed_from(common: &CommonArgs, file: &FileCfg) -> Result<u64, CliError> {
    resolve(common.seed, file, "seed", Some(0))
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or config: exit 2.
    Usage(String),
    /// A verified pathwise invariant failed: exit 3, with the replicate's
    /// stream key for replay.
    Breach {
        message: String,
        stream_key: Option<StreamKey>,
        config_hash: String,
    },
    /// Everything else (I/O and the like): exit 1.
    Other(anyhow::Error),
}

impl CliError {
    /// Lifts a core error, attaching replicate context for breaches.
    pub fn from_core(err: erw_core::Error, key: Option<StreamKey>, hash: &str) -> Self {
        match err {
            erw_core::Error::CouplingViolation { .. } => CliError::Breach {
                message: err.to_string(),
                stream_key: key,
                config_hash: hash.to_string(),
            },
            erw_core::Error::InvalidParam(_) | erw_core::Error::Censoring { .. } => {
                CliError::Usage(err.to_string())
            }
            other => CliError::Other(other.into()),
        }
    }

    /// Prints the machine-readable error JSON to stderr and returns the
    /// process exit code.
    pub fn report(self) -> u8 {
        match self {
            CliError::Usage(message) => {
                eprintln!("{}", serde_json::json!({ "error": message }));
                2
            }
            CliError::Breach {
                message,
                stream_key,
                config_hash,
            } => {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "error": message,
                        "stream_key": stream_key,
                        "config_hash": config_hash,
                    })
                );
                3
            }
            CliError::Other(err) => {
                eprintln!("{}", serde_json::json!({ "error": format!("{err:#}") }));
                1
            }
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}
