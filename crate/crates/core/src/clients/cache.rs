//! Append-only JSONL response cache.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub kind: String,
    /// Canonical JSON text of the response.
    pub response: String,
    pub timestamp: u64,
    pub provider_version: String,
}

/// Canonical JSON text: object keys sorted, no insignificant whitespace.
pub fn canonical_json(value: &Value) -> String {
    // serde_json's default map is ordered by key
    serde_json::to_string(value).expect("JSON values serialize")
}

/// SHA-256 over the kind and the canonical request.
pub fn cache_key(kind: &str, request: &Value) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(b"\n");
    h.update(canonical_json(request).as_bytes());
    hex::encode(h.finalize())
}

pub struct ResponseCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
}

impl ResponseCache {
    /// Open (creating if needed) the cache at `path`.
    pub fn open(path: &Path) -> Result<ResponseCache> {
        let cache = Self::load(path, true)?;
        Ok(cache)
    }

    /// Open an existing cache without write access.
    pub fn open_read_only(path: &Path) -> Result<ResponseCache> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "cache file does not exist"),
            ));
        }
        Self::load(path, false)
    }

    fn load(path: &Path, writable: bool) -> Result<ResponseCache> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| Error::Record {
                    file: path.display().to_string(),
                    line: i + 1,
                    field: "entry".into(),
                    message: e.to_string(),
                })?;
                // first write wins
                entries.entry(entry.key.clone()).or_insert(entry);
            }
        }
        let writer = if writable {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?,
            )
        } else {
            None
        };
        Ok(ResponseCache {
            path: path.to_path_buf(),
            entries: RwLock::new(entries),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    /// Parsed response for `key`.
    pub fn get_value(&self, key: &str) -> Result<Option<Value>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => Ok(Some(serde_json::from_str(&e.response)?)),
        }
    }

    /// Store a response; an existing entry under the same key is kept.
    pub fn put(&self, kind: &str, key: &str, response: &Value, provider_version: &str) -> Result<CacheEntry> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        if let Some(existing) = self.get(key) {
            return Ok(existing);
        }
        let entry = CacheEntry {
            key: key.to_string(),
            kind: kind.to_string(),
            response: canonical_json(response),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            provider_version: provider_version.to_string(),
        };
        let Some(file) = writer.as_mut() else {
            return Err(Error::InvalidArgument(format!(
                "cache {} is read-only",
                self.path.display()
            )));
        };
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(&self.path, e))?;
        self.entries
            .write()
            .expect("cache lock")
            .insert(key.to_string(), entry.clone());
        Ok(entry)
    }
}
