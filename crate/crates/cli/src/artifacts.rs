//! Run directory outputs: config echo, CSV / JSON files and the MANIFEST.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "MANIFEST";
/// The config file exactly as given.
pub const CONFIG_ECHO: &str = "config.toml";
/// The config after command-line overrides; parses back to the run config.
pub const CONFIG_RESOLVED: &str = "config.resolved.toml";

pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::Data(format!("{}: {e}", root.display())))?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, bytes).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        Ok(p)
    }

    pub fn echo_config(&self, text: &str, config: &RunConfig) -> CliResult<()> {
        self.write(CONFIG_ECHO, text.as_bytes())?;
        self.write(CONFIG_RESOLVED, config.to_toml().as_bytes())?;
        Ok(())
    }

    pub fn write_csv<R: Serialize>(&self, name: &str, rows: &[R]) -> CliResult<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn write_json<V: Serialize>(&self, name: &str, value: &V) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_jsonl<V: Serialize>(&self, name: &str, rows: &[V]) -> CliResult<PathBuf> {
        let mut text = String::new();
        for r in rows {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    /// Hash every file under the run directory into `MANIFEST`, one
    /// `<sha256>  <relative path>` line per file in path order.
    pub fn seal(&self) -> CliResult<()> {
        let mut files = Vec::new();
        collect_files(&self.root, &mut files)?;
        let mut lines = Vec::new();
        for f in files {
            let rel = f.strip_prefix(&self.root).expect("file lies under root");
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            if rel == MANIFEST_FILE {
                continue;
            }
            let digest = Sha256::digest(fs::read(&f)?);
            lines.push(format!("{}  {rel}\n", hex(&digest)));
        }
        lines.sort_by(|a, b| a[66..].cmp(&b[66..]));
        self.write(MANIFEST_FILE, lines.concat().as_bytes())?;
        Ok(())
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse a MANIFEST and check every listed hash; returns the file count.
pub fn verify_manifest(root: &Path) -> CliResult<usize> {
    let text = fs::read_to_string(root.join(MANIFEST_FILE))?;
    let mut n = 0;
    for line in text.lines() {
        let (hash, rel) = line.split_once("  ").ok_or_else(|| CliError::Data(format!("bad MANIFEST line {line:?}")))?;
        let got = hex(&Sha256::digest(fs::read(root.join(rel))?));
        if got != hash {
            return Err(CliError::Data(format!("hash mismatch for {rel}")));
        }
        n += 1;
    }
    Ok(n)
}
