//! Embedding vectors: normalization, the deterministic test embedder, the
//! remote HTTP client and the content-addressed JSONL cache.

mod cache;
mod deterministic;
mod remote;

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};

pub use cache::{cache_key, CacheEntry, CachedEmbedder, EmbeddingCache};
pub use deterministic::{embed_text_deterministic, fnv1a64, splitmix64};
pub use remote::{fetch_remote_embeddings, RetryPolicy};

/// Environment variable holding the bearer token for remote embedding calls.
pub const API_KEY_ENV: &str = "EMBED_API_KEY";

/// Unit-norm dense vector with finite components and at least two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Scales `raw` to unit L2 norm.
    pub fn normalize(raw: Vec<T>) -> Result<Self> {
        check_shape(&raw)?;
        let n = norm(&raw);
        if n == T::zero() {
            return Err(Error::degenerate("cannot normalize a zero vector"));
        }
        if !n.is_finite() {
            return Err(Error::invalid("vector norm overflows"));
        }
        let values = raw.into_iter().map(|x| x / n).collect();
        Ok(EmbeddingVector { values })
    }

    /// Wraps a vector that is already unit-norm, without rescaling it.
    pub fn from_unit(values: Vec<T>) -> Result<Self> {
        check_shape(&values)?;
        let n = norm(&values);
        if (n - T::one()).abs() > T::unit_norm_tol() {
            return Err(Error::invalid(format!("vector is not unit-norm (norm {n})")));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    /// Cosine similarity; both vectors are unit-norm so this is the dot product.
    pub fn dot(&self, other: &Self) -> T {
        crate::scalar::dot(&self.values, &other.values)
    }
}

fn check_shape<T: Scalar>(v: &[T]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::invalid(format!("embedding dim must be >= 2, got {}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite component at index {i}")));
    }
    Ok(())
}

impl<T> AsRef<[T]> for EmbeddingVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    DeterministicTest,
    RemoteHttp,
}

/// Where embeddings come from. `model_id` is part of every cache key.
#[derive(Debug, Clone)]
pub struct EmbeddingSource {
    pub kind: SourceKind,
    pub model_id: String,
    pub endpoint: Option<String>,
    pub dim: usize,
    pub api_key: Option<String>,
    /// Texts per HTTP request.
    pub batch_size: usize,
    /// Concurrent HTTP requests.
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl EmbeddingSource {
    pub fn deterministic(model_id: impl Into<String>, dim: usize) -> Self {
        EmbeddingSource {
            kind: SourceKind::DeterministicTest,
            model_id: model_id.into(),
            endpoint: None,
            dim,
            api_key: None,
            batch_size: 64,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(60),
        }
    }

    /// Remote source; the bearer token is read from `EMBED_API_KEY` when set.
    pub fn remote(model_id: impl Into<String>, endpoint: impl Into<String>, dim: usize) -> Self {
        EmbeddingSource {
            kind: SourceKind::RemoteHttp,
            endpoint: Some(endpoint.into()),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            ..Self::deterministic(model_id, dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::invalid(format!("source dim must be >= 2, got {}", self.dim)));
        }
        if self.model_id.is_empty() {
            return Err(Error::invalid("model_id must be non-empty"));
        }
        if self.kind == SourceKind::RemoteHttp && self.endpoint.is_none() {
            return Err(Error::invalid("remote-http source requires an endpoint"));
        }
        if self.batch_size == 0 || self.max_in_flight == 0 {
            return Err(Error::invalid("batch_size and max_in_flight must be positive"));
        }
        Ok(())
    }
}

/// Anything that can turn texts into unit-norm vectors, in input order.
pub trait EmbeddingProvider: Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;
}

impl EmbeddingProvider for EmbeddingSource {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        self.validate()?;
        match self.kind {
            SourceKind::DeterministicTest => texts
                .iter()
                .map(|t| embed_text_deterministic(t, self.dim))
                .collect(),
            SourceKind::RemoteHttp => fetch_remote_embeddings(texts, self),
        }
    }
}

/// Fixed text → vector lookup. Used for precomputed batches and for
/// hand-constructed fixture geometry.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    vectors: HashMap<String, EmbeddingVector>,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, text: impl Into<String>, vector: EmbeddingVector) {
        self.vectors.insert(text.into(), vector);
    }

    pub fn get(&self, text: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(text)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Embeds every distinct text once through `provider`.
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let unique: Vec<&str> = texts.into_iter().filter(|t| seen.insert(*t)).collect();
        let vectors = provider.embed(&unique)?;
        Ok(EmbeddingTable {
            vectors: unique.iter().map(|t| t.to_string()).zip(vectors).collect(),
        })
    }
}

impl EmbeddingProvider for EmbeddingTable {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        texts
            .iter()
            .map(|t| {
                self.vectors
                    .get(*t)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("no embedding for text {t:?}")))
            })
            .collect()
    }
}
