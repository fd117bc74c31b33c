//! Append-only JSONL embedding cache keyed by SHA-256 of `(model_id, text)`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::{EmbeddingProvider, EmbeddingSource, EmbeddingVector};

const KEY_SEPARATOR: u8 = 0x1f;

/// Hex SHA-256 of `model_id || 0x1F || text`.
pub fn cache_key(model_id: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([KEY_SEPARATOR]);
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

/// One line of the cache file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CacheEntry {
    pub key: String,
    pub model_id: String,
    pub dim: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Stored {
    line: usize,
    model_id: String,
    dim: usize,
    vector: Vec<f64>,
}

#[derive(Debug)]
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, Stored>>,
    writer: Mutex<Option<File>>,
    lines: Mutex<usize>,
}

impl EmbeddingCache {
    /// Cache that lives only for the life of the process.
    pub fn in_memory() -> Self {
        EmbeddingCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
            lines: Mutex::new(0),
        }
    }

    /// Loads `path` if it exists; later lines for the same key win.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        let mut line_count = 0;
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line_no = i + 1;
                line_count = line_no;
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| Error::CacheCorruption {
                    path: path.clone(),
                    line: line_no,
                    message,
                };
                let entry: CacheEntry =
                    serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if entry.vector.len() != entry.dim {
                    return Err(corrupt(format!(
                        "vector has {} components but dim is {}",
                        entry.vector.len(),
                        entry.dim
                    )));
                }
                EmbeddingVector::from_unit(entry.vector.clone())
                    .map_err(|e| corrupt(e.to_string()))?;
                entries.insert(
                    entry.key,
                    Stored {
                        line: line_no,
                        model_id: entry.model_id,
                        dim: entry.dim,
                        vector: entry.vector,
                    },
                );
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(EmbeddingCache {
            path: Some(path),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(writer)),
            lines: Mutex::new(line_count),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(&self, key: &str, source: &EmbeddingSource) -> Result<Option<EmbeddingVector>> {
        let entries = self.entries.read().expect("cache lock");
        let Some(stored) = entries.get(key) else { return Ok(None) };
        let corrupt = |message: String| Error::CacheCorruption {
            path: self.path.clone().unwrap_or_default(),
            line: stored.line,
            message,
        };
        if stored.model_id != source.model_id {
            return Err(corrupt(format!(
                "key collision between models {:?} and {:?}",
                stored.model_id, source.model_id
            )));
        }
        if stored.dim != source.dim {
            return Err(corrupt(format!(
                "entry has dim {} but source {:?} has dim {}",
                stored.dim, source.model_id, source.dim
            )));
        }
        Ok(Some(EmbeddingVector::from_unit(stored.vector.clone()).map_err(|e| corrupt(e.to_string()))?))
    }

    fn store(&self, key: String, source: &EmbeddingSource, vector: &EmbeddingVector) -> Result<()> {
        let entry = CacheEntry {
            key,
            model_id: source.model_id.clone(),
            dim: vector.dim(),
            vector: vector.as_slice().to_vec(),
        };
        let mut lines = self.lines.lock().expect("cache lock");
        if let (Some(path), Some(file)) = (&self.path, self.writer.lock().expect("cache lock").as_mut()) {
            let mut line = serde_json::to_string(&entry).expect("cache entry serializes");
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
            file.flush().map_err(|e| Error::io(path, e))?;
        }
        *lines += 1;
        self.entries.write().expect("cache lock").insert(
            entry.key,
            Stored { line: *lines, model_id: entry.model_id, dim: entry.dim, vector: entry.vector },
        );
        Ok(())
    }

    /// Returns cached vectors on key hits and embeds (then stores) only the
    /// misses. Duplicate texts in one call are embedded once.
    pub fn get_or_embed(
        &self,
        texts: &[&str],
        source: &EmbeddingSource,
    ) -> Result<Vec<EmbeddingVector>> {
        let keys: Vec<String> = texts.iter().map(|t| cache_key(&source.model_id, t)).collect();
        let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(texts.len());
        let mut missing: Vec<&str> = Vec::new();
        let mut missing_keys: Vec<&str> = Vec::new();
        for (text, key) in texts.iter().zip(&keys) {
            let hit = self.lookup(key, source)?;
            if hit.is_none() && !missing_keys.contains(&key.as_str()) {
                missing.push(text);
                missing_keys.push(key);
            }
            out.push(hit);
        }
        if !missing.is_empty() {
            let fresh = source.embed(&missing)?;
            for (key, vector) in missing_keys.iter().zip(&fresh) {
                self.store(key.to_string(), source, vector)?;
            }
            let fresh: HashMap<&str, &EmbeddingVector> =
                missing_keys.iter().copied().zip(fresh.iter()).collect();
            for (slot, key) in out.iter_mut().zip(&keys) {
                if slot.is_none() {
                    *slot = Some(fresh[key.as_str()].clone());
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
    }
}

/// A source paired with a cache; implements [`EmbeddingProvider`].
pub struct CachedEmbedder<'a> {
    pub source: &'a EmbeddingSource,
    pub cache: &'a EmbeddingCache,
}

impl EmbeddingProvider for CachedEmbedder<'_> {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        self.cache.get_or_embed(texts, self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_model_and_text() {
        let a = cache_key("m1", "hello");
        assert_eq!(a, cache_key("m1", "hello"));
        assert_ne!(a, cache_key("m2", "hello"));
        assert_ne!(a, cache_key("m1", "hello "));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn separator_prevents_boundary_collisions() {
        assert_ne!(cache_key("ab", "c"), cache_key("a", "bc"));
    }

    #[test]
    fn known_digest() {
        // sha256("m\x1ft")
        let mut h = Sha256::new();
        h.update(b"m\x1ft");
        assert_eq!(cache_key("m", "t"), hex::encode(h.finalize()));
    }

    #[test]
    fn in_memory_cache_hits_after_first_call() {
        let cache = EmbeddingCache::in_memory();
        let source = EmbeddingSource::deterministic("det", 8);
        let first = cache.get_or_embed(&["a b", "c", "a b"], &source).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(first[0], first[2]);
        let second = cache.get_or_embed(&["c", "a b"], &source).unwrap();
        assert_eq!(second[0], first[1]);
        assert_eq!(cache.len(), 2);
    }
}
