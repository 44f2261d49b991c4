use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    hash: String,
    prompt: String,
    goals: Vec<String>,
}

/// Append-only prompt → goals cache backed by a JSON-lines file.
#[derive(Debug, Default)]
pub struct QueryCache {
    entries: HashMap<String, Vec<String>>,
    path: Option<PathBuf>,
}

impl QueryCache {
    /// In-memory only.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads every record from `path` (if it exists); later inserts append.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| Error::Cache(e.to_string()))?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::Cache(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::Cache(format!("line {}: {e}", n + 1)))?;
                entries.entry(rec.hash).or_insert(rec.goals);
            }
        }
        Ok(Self {
            entries,
            path: Some(path),
        })
    }

    pub fn hash_prompt(prompt: &str) -> String {
        hex::encode(Sha256::digest(prompt.as_bytes()))
    }

    pub fn lookup(&self, hash: &str) -> Option<&[String]> {
        self.entries.get(hash).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First answer for a hash wins; re-inserting is a no-op.
    pub fn insert(&mut self, hash: &str, prompt: &str, goals: &[String]) -> Result<()> {
        if self.entries.contains_key(hash) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let rec = CacheRecord {
                hash: hash.to_string(),
                prompt: prompt.to_string(),
                goals: goals.to_vec(),
            };
            let line = serde_json::to_string(&rec).map_err(|e| Error::Cache(e.to_string()))?;
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::Cache(e.to_string()))?;
            writeln!(f, "{line}").map_err(|e| Error::Cache(e.to_string()))?;
        }
        self.entries.insert(hash.to_string(), goals.to_vec());
        Ok(())
    }
}
