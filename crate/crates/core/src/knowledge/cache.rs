use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{KbError, KnowledgePassage};

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Record {
    endpoint: String,
    term: String,
    comment: String,
    not_found: bool,
    fetched_at: String,
}

/// Append-only JSON-lines cache keyed by (endpoint, term). The last record
/// for a key wins on reload.
#[derive(Debug)]
pub struct KbCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<(String, String), Record>>,
    writer: Mutex<Option<File>>,
}

impl KbCache {
    /// Cache that lives only in memory.
    pub fn in_memory() -> Self {
        Self { path: None, entries: RwLock::default(), writer: Mutex::new(None) }
    }

    /// Loads `path` if it exists and appends new records to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, KbError> {
        let path = path.as_ref().to_path_buf();
        let cache_err = |msg: String| KbError::Cache { path: path.clone(), msg };
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| cache_err(e.to_string()))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| cache_err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: Record =
                    serde_json::from_str(&line).map_err(|e| cache_err(format!("line {}: {e}", i + 1)))?;
                entries.insert((rec.endpoint.clone(), rec.term.clone()), rec);
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| cache_err(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| cache_err(e.to_string()))?;
        Ok(Self { path: Some(path), entries: RwLock::new(entries), writer: Mutex::new(Some(file)) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cached passage with `source` set to `"cache"`.
    pub fn get(&self, endpoint: &str, term: &str) -> Option<KnowledgePassage> {
        let entries = self.entries.read().expect("cache lock");
        entries.get(&(endpoint.to_string(), term.to_string())).map(|r| KnowledgePassage {
            term: r.term.clone(),
            comment: r.comment.clone(),
            not_found: r.not_found,
            source: "cache".into(),
            fetched_at: r.fetched_at.clone(),
        })
    }

    pub fn put(&self, endpoint: &str, passage: &KnowledgePassage) -> Result<(), KbError> {
        let rec = Record {
            endpoint: endpoint.into(),
            term: passage.term.clone(),
            comment: passage.comment.clone(),
            not_found: passage.not_found,
            fetched_at: passage.fetched_at.clone(),
        };
        let mut writer = self.writer.lock().expect("cache writer lock");
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_string(&rec).expect("record serializes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| KbError::Cache { path: self.path.clone().unwrap_or_default(), msg: e.to_string() })?;
        }
        self.entries.write().expect("cache lock").insert((rec.endpoint.clone(), rec.term.clone()), rec);
        Ok(())
    }
}
