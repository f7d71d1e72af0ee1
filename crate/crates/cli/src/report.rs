//! Report files and error-to-exit-code mapping.

use std::fs;
use std::path::{Path, PathBuf};

use moran::ErrorClass;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Lib(ErrorClass, String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Lib(ErrorClass::Precondition, _) => 3,
            Failure::Lib(ErrorClass::Certification, _) => 4,
            Failure::Lib(ErrorClass::ResourceGuard, _) => 5,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config: {m}"),
            Failure::Lib(c, m) => write!(f, "{c:?}: {m}"),
            Failure::Io(m) => write!(f, "io: {m}"),
        }
    }
}

/// Writes reports that carry the command, library version, config hash and
/// seed. Nothing time-dependent goes into a file, so equal inputs give
/// byte-identical outputs.
pub struct Reporter {
    dir: PathBuf,
    command: &'static str,
    hash: String,
    seed: u64,
}

fn io(e: impl std::fmt::Display) -> Failure {
    Failure::Io(e.to_string())
}

impl Reporter {
    pub fn new(dir: &Path, command: &'static str, cfg: &RunConfig) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), command, hash: cfg.hash(), seed: cfg.seed })
    }

    pub fn json(&self, data: &impl Serialize) -> Result<(), Failure> {
        let doc = serde_json::json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.hash,
            "seed": self.seed,
            "data": data,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(io)?;
        fs::write(self.dir.join(format!("{}.json", self.command)), text + "\n").map_err(io)
    }

    /// CSV with `#` comment lines for the metadata, then a header row.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
        let mut buf = format!(
            "# moran {} command={} config_hash={} seed={}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.hash,
            self.seed
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header).map_err(io)?;
            for r in rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
        fs::write(self.dir.join(format!("{name}.csv")), buf).map_err(io)
    }
}
