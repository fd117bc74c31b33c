//! HTTP client for the common `{"model", "input"}` → `{"data": [{"embedding"}]}`
//! embedding API layout.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};

use super::{EmbeddingSource, EmbeddingVector};

/// Exponential backoff for 429 / 5xx / connection failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub max_attempts: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { base: Duration::from_secs(1), factor: 2, max_attempts: 5 }
    }
}

impl RetryPolicy {
    /// Delay after the given failed attempt (1-based).
    pub fn delay(&self, attempt: usize) -> Duration {
        let exp = u32::try_from(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base.saturating_mul(self.factor.saturating_pow(exp))
    }
}

#[derive(Deserialize)]
struct ResponseBody {
    data: Vec<ResponseItem>,
}

#[derive(Deserialize)]
struct ResponseItem {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

/// Embeds `texts` through the remote endpoint of `source`.
///
/// Texts are sent in batches of `source.batch_size`, with at most
/// `source.max_in_flight` requests outstanding. The result is aligned 1:1
/// with `texts`.
pub fn fetch_remote_embeddings(
    texts: &[&str],
    source: &EmbeddingSource,
) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(Error::invalid("no texts to embed"));
    }
    let endpoint = source
        .endpoint
        .as_deref()
        .ok_or_else(|| Error::invalid("remote-http source requires an endpoint"))?;
    let agent = ureq::AgentBuilder::new().timeout(source.timeout).build();

    let batches: Vec<&[&str]> = texts.chunks(source.batch_size.max(1)).collect();
    let results: Mutex<Vec<Option<Result<Vec<EmbeddingVector>>>>> =
        Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = source.max_in_flight.max(1).min(batches.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(batch) = batches.get(i) else { break };
                let outcome = fetch_batch(&agent, endpoint, batch, source);
                let failed = outcome.is_err();
                results.lock().expect("result slots")[i] = Some(outcome);
                if failed {
                    // stop handing out further batches
                    next.store(batches.len(), Ordering::SeqCst);
                }
            });
        }
    });

    let mut out = Vec::with_capacity(texts.len());
    for slot in results.into_inner().expect("result slots") {
        match slot {
            Some(Ok(vectors)) => out.extend(vectors),
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    if out.len() != texts.len() {
        return Err(Error::Protocol(format!(
            "expected {} embeddings, assembled {}",
            texts.len(),
            out.len()
        )));
    }
    Ok(out)
}

fn fetch_batch(
    agent: &ureq::Agent,
    endpoint: &str,
    texts: &[&str],
    source: &EmbeddingSource,
) -> Result<Vec<EmbeddingVector>> {
    let body = json!({ "model": source.model_id, "input": texts });
    let policy = source.retry;
    let mut attempt = 0;
    loop {
        attempt += 1;
        let mut request = agent.post(endpoint).set("Content-Type", "application/json");
        if let Some(key) = &source.api_key {
            request = request.set("Authorization", &format!("Bearer {key}"));
        }
        let failure = match request.send_json(&body) {
            Ok(response) => {
                let parsed: ResponseBody = response
                    .into_json()
                    .map_err(|e| Error::Protocol(format!("malformed response body: {e}")))?;
                return decode(parsed, texts.len(), source.dim);
            }
            Err(ureq::Error::Status(status @ (401 | 403), _)) => {
                return Err(Error::Auth { status })
            }
            Err(ureq::Error::Status(status, _)) if status == 429 || status >= 500 => {
                format!("HTTP {status}")
            }
            Err(ureq::Error::Status(status, response)) => {
                let detail = response.into_string().unwrap_or_default();
                return Err(Error::Protocol(format!("HTTP {status}: {}", detail.trim())));
            }
            Err(ureq::Error::Transport(t)) => t.to_string(),
        };
        if attempt >= policy.max_attempts {
            return Err(Error::Transport { attempts: attempt, message: failure });
        }
        std::thread::sleep(policy.delay(attempt));
    }
}

fn decode(body: ResponseBody, expected: usize, dim: usize) -> Result<Vec<EmbeddingVector>> {
    if body.data.len() != expected {
        return Err(Error::Protocol(format!(
            "requested {expected} embeddings, response carried {}",
            body.data.len()
        )));
    }
    let mut items = body.data;
    if items.iter().all(|item| item.index.is_some()) {
        items.sort_by_key(|item| item.index);
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            if item.embedding.len() != dim {
                return Err(Error::Protocol(format!(
                    "embedding {i} has dim {}, expected {dim}",
                    item.embedding.len()
                )));
            }
            EmbeddingVector::normalize(item.embedding)
                .map_err(|e| Error::Protocol(format!("embedding {i}: {e}")))
        })
        .collect()
}
