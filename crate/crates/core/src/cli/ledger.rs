use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::sha256_file;
use crate::error::{Error, Result};

pub const LOCK_FILE: &str = ".lock";
pub const LEDGER_FILE: &str = "ledger.jsonl";

/// Exclusive lock on a store, released on drop.
#[derive(Debug)]
pub struct StoreLock {
    path: PathBuf,
}

impl StoreLock {
    pub fn acquire(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "store {} is locked by another command (remove {} if it is stale)",
                root.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// One ledger line per successful command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub command: String,
    pub started: String,
    pub elapsed_ms: u128,
    pub config_hash: String,
    /// Input path → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Paths relative to the store root.
    pub outputs: Vec<String>,
}

#[derive(Debug)]
pub struct RunLedger {
    root: PathBuf,
    entry: LedgerEntry,
    clock: Instant,
}

impl RunLedger {
    pub fn start(root: &Path, command: &str, config_hash: String) -> Self {
        Self {
            root: root.to_path_buf(),
            entry: LedgerEntry {
                command: command.to_string(),
                started: chrono::Utc::now().to_rfc3339(),
                elapsed_ms: 0,
                config_hash,
                inputs: BTreeMap::new(),
                outputs: Vec::new(),
            },
            clock: Instant::now(),
        }
    }

    pub fn input_checksum(&mut self, label: impl Into<String>, checksum: impl Into<String>) {
        self.entry.inputs.insert(label.into(), checksum.into());
    }

    pub fn input_file(&mut self, path: &Path) -> Result<()> {
        let sum = sha256_file(path)?;
        self.input_checksum(path.display().to_string(), sum);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        self.entry.outputs.push(rel.display().to_string());
    }

    pub fn commit(mut self) -> Result<LedgerEntry> {
        self.entry.elapsed_ms = self.clock.elapsed().as_millis();
        let path = self.root.join(LEDGER_FILE);
        let mut line = serde_json::to_vec(&self.entry).expect("ledger entry serializes");
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        f.write_all(&line).map_err(|e| Error::io(&path, e))?;
        Ok(self.entry)
    }
}

pub fn read_ledger(root: &Path) -> Result<Vec<LedgerEntry>> {
    let path = root.join(LEDGER_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::Integrity(format!("corrupt ledger: {e}")))
        })
        .collect()
}

/// Scratch directory inside the store whose contents replace `dest` on commit.
#[derive(Debug)]
pub struct Staging {
    dir: PathBuf,
    dest: PathBuf,
    done: bool,
}

impl Staging {
    pub fn new(root: &Path, dest: &Path) -> Result<Self> {
        let dir = root.join(format!(".staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            dest: dest.to_path_buf(),
            done: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Swaps the staged tree into place.
    pub fn commit(mut self) -> Result<()> {
        if let Some(parent) = self.dest.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let old = self.dir.with_extension("old");
        if self.dest.exists() {
            fs::rename(&self.dest, &old).map_err(|e| Error::io(&self.dest, e))?;
        }
        fs::rename(&self.dir, &self.dest).map_err(|e| Error::io(&self.dest, e))?;
        if old.exists() {
            fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
        }
        self.done = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}
