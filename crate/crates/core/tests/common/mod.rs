#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthscore::{EmbeddingVector, PremiseMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Components uniform in [-1, 1], then normalized.
pub fn random_unit(rng: &mut impl Rng, dim: usize) -> EmbeddingVector {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(v) = EmbeddingVector::normalize(raw) {
            return v;
        }
    }
}

pub fn random_premises(rng: &mut impl Rng, dim: usize, k: usize) -> PremiseMatrix {
    PremiseMatrix::from_columns((0..k).map(|_| random_unit(rng, dim)).collect()).unwrap()
}

/// Orthonormalizes a seeded random square matrix (modified Gram-Schmidt).
/// Rows of the result form an orthogonal matrix.
pub fn random_orthogonal(rng: &mut impl Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while q.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for basis in &q {
            let d: f64 = v.iter().zip(basis).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(basis).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            q.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    q
}

pub fn rotate(q: &[Vec<f64>], v: &EmbeddingVector) -> EmbeddingVector {
    let out: Vec<f64> = q
        .iter()
        .map(|row| row.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum())
        .collect();
    EmbeddingVector::normalize(out).unwrap()
}

pub fn rotate_premises(q: &[Vec<f64>], p: &PremiseMatrix) -> PremiseMatrix {
    PremiseMatrix::new(p.columns().iter().map(|c| rotate(q, c)).collect(), p.group_of().to_vec())
        .unwrap()
}

/// Canned HTTP reply.
#[derive(Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Reply {
    pub fn ok(body: impl Into<String>) -> Self {
        Reply { status: 200, body: body.into() }
    }

    pub fn status(status: u16) -> Self {
        Reply { status, body: "{}".into() }
    }
}

/// Request as seen by the mock server.
#[derive(Debug, Clone)]
pub struct Seen {
    pub authorization: Option<String>,
    pub body: serde_json::Value,
}

/// Minimal HTTP/1.1 server for embedding endpoint tests. `respond` maps each
/// request (in arrival order) to a reply.
pub struct MockServer {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
    pub seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    pub fn start<F>(respond: F) -> Self
    where
        F: Fn(usize, &Seen) -> Reply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/embeddings", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let seen = Arc::new(Mutex::new(Vec::new()));
        let respond = Arc::new(respond);
        {
            let hits = hits.clone();
            let seen = seen.clone();
            thread::spawn(move || {
                for stream in listener.incoming() {
                    let Ok(stream) = stream else { continue };
                    let hits = hits.clone();
                    let seen = seen.clone();
                    let respond = respond.clone();
                    thread::spawn(move || serve(stream, &hits, &seen, &*respond));
                }
            });
        }
        MockServer { url, hits, seen }
    }

    /// Echoes a vector for each input text: the deterministic embedding of
    /// the text at `dim`.
    pub fn echo(dim: usize) -> Self {
        Self::start(move |_, req| {
            let texts = req.body["input"].as_array().unwrap();
            let data: Vec<serde_json::Value> = texts
                .iter()
                .map(|t| {
                    let v = synthscore::embedding::embed_text_deterministic(t.as_str().unwrap(), dim)
                        .unwrap();
                    serde_json::json!({ "embedding": v.as_slice() })
                })
                .collect();
            Reply::ok(serde_json::json!({ "data": data }).to_string())
        })
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(
    stream: TcpStream,
    hits: &AtomicUsize,
    seen: &Mutex<Vec<Seen>>,
    respond: &(dyn Fn(usize, &Seen) -> Reply + Send + Sync),
) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let mut content_length = 0;
        let mut authorization = None;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            let (name, value) = line.split_once(':').unwrap();
            match name.to_ascii_lowercase().as_str() {
                "content-length" => content_length = value.trim().parse().unwrap(),
                "authorization" => authorization = Some(value.trim().to_string()),
                _ => {}
            }
        }
        let mut body = vec![0; content_length];
        reader.read_exact(&mut body).unwrap();
        let req = Seen {
            authorization,
            body: serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null),
        };
        let n = hits.fetch_add(1, Ordering::SeqCst);
        let reply = respond(n, &req);
        seen.lock().unwrap().push(req);
        let response = format!(
            "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{}",
            reply.status,
            reply.body.len(),
            reply.body
        );
        let mut out = stream.try_clone().unwrap();
        if out.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}
