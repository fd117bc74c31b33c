//! `synthscore` command line: score, evaluate, distribution and embed runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::distribution::{
    bimodality_coefficient, distinctiveness, two_cluster_split, BimodalityResult, ClusterSplit,
};
use crate::embedding::{
    CachedEmbedder, EmbeddingCache, EmbeddingProvider, EmbeddingSource, EmbeddingTable,
    EmbeddingVector, RetryPolicy, SourceKind, API_KEY_ENV,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    buckets_csv, evaluate_scored, load_dataset, score_dataset, LabeledDataset,
};
use crate::metrics::{five_number, FiveNumber};
use crate::output::{csv_field, format_f64, to_json_line, to_json_pretty};
use crate::scoring::{collect_texts, Aggregation, Granularity, MetaParameters, ScoreBreakdown, SubelementScore};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: SourceKind,
    pub model_id: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    pub dim: usize,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_in_flight() -> usize {
    4
}
fn default_batch() -> usize {
    64
}
fn default_retry_base_ms() -> u64 {
    1000
}
fn default_attempts() -> usize {
    5
}
fn default_timeout() -> u64 {
    60
}

impl EmbeddingConfig {
    pub fn to_source(&self) -> Result<EmbeddingSource> {
        let mut source = match self.kind {
            SourceKind::DeterministicTest => EmbeddingSource::deterministic(&self.model_id, self.dim),
            SourceKind::RemoteHttp => EmbeddingSource::remote(
                &self.model_id,
                self.endpoint.clone().unwrap_or_default(),
                self.dim,
            ),
        };
        if self.kind == SourceKind::RemoteHttp && self.endpoint.is_none() {
            return Err(Error::invalid("embedding.endpoint is required for remote-http"));
        }
        source.max_in_flight = self.max_in_flight;
        source.batch_size = self.batch_size;
        source.retry = RetryPolicy {
            base: Duration::from_millis(self.retry_base_ms),
            max_attempts: self.max_attempts.max(1),
            ..RetryPolicy::default()
        };
        source.timeout = Duration::from_secs(self.timeout_secs.max(1));
        source.validate()?;
        Ok(source)
    }
}

/// Everything a run needs besides its input files.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub meta: MetaParameters,
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Parses a config file. A relative `cache_path` is resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&raw).map_err(|e| Error::Schema {
            location: format!("{}:{}", path.display(), e.line()),
            message: e.to_string(),
        })?;
        if let Some(cache) = &config.cache_path {
            if cache.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.cache_path = Some(base.join(cache));
            }
        }
        config.meta.validate()?;
        if config.parallelism == Some(0) {
            return Err(Error::invalid("parallelism must be positive"));
        }
        Ok(config)
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "synthscore", version, about = "Creativity scoring in embedding space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every response; writes scores.jsonl and summary.json.
    Score(RunArgs),
    /// Score labeled responses and compare with labels; writes report.json,
    /// buckets.csv and scores.jsonl.
    Evaluate(RunArgs),
    /// Bimodality and distinctiveness of a scores.jsonl population.
    Distribution {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed texts into the cache.
    Embed {
        #[arg(long)]
        config: PathBuf,
        /// JSONL with one {"text": ...} object per line.
        #[arg(long)]
        texts: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    activities: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long, value_parser = parse_granularity)]
    granularity: Option<Granularity>,
    #[arg(long, value_parser = parse_aggregation)]
    aggregation: Option<Aggregation>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

fn parse_granularity(s: &str) -> std::result::Result<Granularity, String> {
    match s {
        "element" => Ok(Granularity::Element),
        "subelement" => Ok(Granularity::Subelement),
        other => Err(format!("expected element or subelement, got {other:?}")),
    }
}

fn parse_aggregation(s: &str) -> std::result::Result<Aggregation, String> {
    match s {
        "mean" => Ok(Aggregation::Mean),
        "max" => Ok(Aggregation::Max),
        other => Err(format!("expected mean or max, got {other:?}")),
    }
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(cache) = &self.cache {
            config.cache_path = Some(cache.clone());
        }
        if let Some(p) = self.parallelism {
            if p == 0 {
                return Err(Error::invalid("--parallelism must be positive"));
            }
            config.parallelism = Some(p);
        }
        if let Some(g) = self.granularity {
            config.meta.granularity = g;
        }
        if let Some(a) = self.aggregation {
            config.meta.subscore_aggregation = a;
        }
        if let Some(a) = self.alpha {
            config.meta.alpha = a;
        }
        if let Some(b) = self.beta {
            config.meta.beta = b;
        }
        config.meta.validate()?;
        Ok(config)
    }
}

/// One line of scores.jsonl.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub response_id: String,
    pub activity_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    pub novelty: f64,
    pub transformation: f64,
    pub creativity: f64,
    #[serde(default)]
    pub per_subelement: Vec<SubelementScore>,
    pub meta: MetaParameters,
    /// Unit-norm embedding of the whole response text.
    pub embedding: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ScoreSummary {
    model_id: String,
    n_activities: usize,
    n_responses: usize,
    meta: MetaParameters,
    mean_novelty: f64,
    mean_transformation: f64,
    mean_creativity: f64,
    creativity: Option<FiveNumber<f64>>,
}

#[derive(Debug, Serialize)]
struct PopulationAnalysis {
    population: String,
    n: usize,
    bimodality: Option<BimodalityResult<f64>>,
    split: Option<ClusterSplit<f64>>,
}

#[derive(Debug, Serialize)]
struct DistributionReport {
    overall: PopulationAnalysis,
    per_activity: Vec<PopulationAnalysis>,
    notes: Vec<String>,
}

#[derive(Deserialize)]
struct TextRecord {
    text: String,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn open_cache(config: &RunConfig) -> Result<EmbeddingCache> {
    match &config.cache_path {
        Some(path) => EmbeddingCache::open(path),
        None => Ok(EmbeddingCache::in_memory()),
    }
}

struct Scored {
    dataset: LabeledDataset,
    scores: Vec<ScoreBreakdown>,
    table: EmbeddingTable,
    config: RunConfig,
}

fn score_inputs(args: &RunArgs) -> Result<Scored> {
    let config = args.config()?;
    let dataset = load_dataset(&args.activities, &args.responses)?;
    let source = config.embedding.to_source()?;
    let cache = open_cache(&config)?;
    let texts = collect_texts(
        &dataset.activities,
        dataset.responses.iter().map(|r| &r.response),
        config.meta.granularity,
    )?;
    let provider = CachedEmbedder { source: &source, cache: &cache };
    let table = EmbeddingTable::build(texts.iter().map(String::as_str), &provider)?;
    let scores = score_dataset(&dataset, &table, &config.meta, config.parallelism())?;
    Ok(Scored { dataset, scores, table, config })
}

fn scores_jsonl(scored: &Scored) -> Result<String> {
    let mut out = String::new();
    for (r, s) in scored.dataset.responses.iter().zip(&scored.scores) {
        let embedding = scored
            .table
            .get(r.response.text.trim())
            .map(|v| v.as_slice().to_vec())
            .ok_or_else(|| Error::invalid(format!("missing embedding for {}", r.response.response_id)))?;
        let record = ScoreRecord {
            response_id: r.response.response_id.clone(),
            activity_id: r.response.activity_id.clone(),
            label: r.label,
            novelty: s.novelty,
            transformation: s.transformation,
            creativity: s.creativity,
            per_subelement: s.per_subelement.clone(),
            meta: s.meta,
            embedding,
        };
        out.push_str(&to_json_line(&record).expect("score record serializes"));
        out.push('\n');
    }
    Ok(out)
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_score(args: &RunArgs) -> Result<()> {
    let scored = score_inputs(args)?;
    create_out_dir(&args.out)?;
    write_file(&args.out.join("scores.jsonl"), &scores_jsonl(&scored)?)?;
    let n = scored.scores.len();
    let mean = |f: fn(&ScoreBreakdown) -> f64| {
        if n == 0 {
            0.0
        } else {
            scored.scores.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let creativity: Vec<f64> = scored.scores.iter().map(|s| s.creativity).collect();
    let summary = ScoreSummary {
        model_id: scored.config.embedding.model_id.clone(),
        n_activities: scored.dataset.activities.len(),
        n_responses: n,
        meta: scored.config.meta,
        mean_novelty: mean(|s| s.novelty),
        mean_transformation: mean(|s| s.transformation),
        mean_creativity: mean(|s| s.creativity),
        creativity: five_number(&creativity),
    };
    write_file(&args.out.join("summary.json"), &to_json_pretty(&summary).expect("summary serializes"))
}

fn cmd_evaluate(args: &RunArgs) -> Result<()> {
    let scored = score_inputs(args)?;
    if scored.dataset.labeled_count() == 0 {
        return Err(Error::invalid(format!(
            "{}: evaluate needs labeled responses",
            args.responses.display()
        )));
    }
    let report = evaluate_scored(&scored.dataset, &scored.scores)?;
    create_out_dir(&args.out)?;
    write_file(&args.out.join("report.json"), &to_json_pretty(&report).expect("report serializes"))?;
    write_file(&args.out.join("buckets.csv"), &buckets_csv(&report.buckets))?;
    write_file(&args.out.join("scores.jsonl"), &scores_jsonl(&scored)?)
}

fn analyse(population: String, scores: &[f64], notes: &mut Vec<String>) -> PopulationAnalysis {
    let bimodality = match bimodality_coefficient(scores) {
        Ok(b) => Some(b),
        Err(e) => {
            notes.push(format!("{population}: bimodality not computed ({e})"));
            None
        }
    };
    let split = two_cluster_split(scores).ok();
    PopulationAnalysis { population, n: scores.len(), bimodality, split }
}

fn cmd_distribution(scores_path: &Path, out: &Path) -> Result<()> {
    let raw = fs::read_to_string(scores_path).map_err(|e| Error::io(scores_path, e))?;
    let mut records = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord = serde_json::from_str(line).map_err(|e| Error::Schema {
            location: format!("{}:{}", scores_path.display(), i + 1),
            message: e.to_string(),
        })?;
        records.push((i + 1, rec));
    }
    if records.is_empty() {
        return Err(Error::invalid(format!("{}: no score records", scores_path.display())));
    }

    let mut notes = Vec::new();
    let all: Vec<f64> = records.iter().map(|(_, r)| r.creativity).collect();
    let overall = analyse("all".into(), &all, &mut notes);

    let mut by_activity: BTreeMap<&str, Vec<&(usize, ScoreRecord)>> = BTreeMap::new();
    for rec in &records {
        by_activity.entry(rec.1.activity_id.as_str()).or_default().push(rec);
    }
    let mut per_activity = Vec::new();
    let mut csv = String::from("response_id,divergence,percentile\n");
    for (activity, members) in &by_activity {
        let scores: Vec<f64> = members.iter().map(|(_, r)| r.creativity).collect();
        per_activity.push(analyse(format!("activity {activity}"), &scores, &mut notes));
        if members.len() < 2 {
            notes.push(format!("activity {activity}: single response, distinctiveness skipped"));
            continue;
        }
        let population = members
            .iter()
            .map(|(line, r)| {
                EmbeddingVector::from_unit(r.embedding.clone())
                    .map(|v| (r.response_id.clone(), v))
                    .map_err(|e| Error::Schema {
                        location: format!("{}:{line}", scores_path.display()),
                        message: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        for d in distinctiveness(&population)?.per_response {
            csv.push_str(&format!(
                "{},{},{}\n",
                csv_field(&d.response_id),
                format_f64(d.divergence),
                format_f64(d.percentile)
            ));
        }
    }

    let report = DistributionReport { overall, per_activity, notes };
    create_out_dir(out)?;
    write_file(&out.join("distribution.json"), &to_json_pretty(&report).expect("report serializes"))?;
    write_file(&out.join("distinctiveness.csv"), &csv)
}

fn cmd_embed(config_path: &Path, texts_path: &Path, cache: Option<&Path>) -> Result<usize> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(c) = cache {
        config.cache_path = Some(c.to_path_buf());
    }
    if config.cache_path.is_none() {
        return Err(Error::invalid("embed needs a cache_path in the config or --cache"));
    }
    let raw = fs::read_to_string(texts_path).map_err(|e| Error::io(texts_path, e))?;
    let mut texts = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TextRecord = serde_json::from_str(line).map_err(|e| Error::Schema {
            location: format!("{}:{}", texts_path.display(), i + 1),
            message: e.to_string(),
        })?;
        texts.push(rec.text);
    }
    let source = config.embedding.to_source()?;
    let cache = open_cache(&config)?;
    let provider = CachedEmbedder { source: &source, cache: &cache };
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    if !refs.is_empty() {
        provider.embed(&refs)?;
    }
    Ok(texts.len())
}

/// Exit status for an error: 2 for remote transport/protocol failures,
/// 1 for everything else.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_transport() {
        2
    } else {
        1
    }
}

fn one_line(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .take_while(|l| !l.starts_with("Usage:"))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code. Diagnostics go to stderr, one line per failure.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("synthscore: usage: {}", one_line(&e.to_string()));
            return 1;
        }
    };
    let outcome = match &cli.command {
        Command::Score(args) => cmd_score(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Distribution { scores, out } => cmd_distribution(scores, out),
        Command::Embed { config, texts, cache } => {
            cmd_embed(config, texts, cache.as_deref()).map(|n| println!("embedded {n} text(s)"))
        }
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let hint = match &e {
                Error::Auth { .. } => format!(" (check {API_KEY_ENV})"),
                _ => String::new(),
            };
            eprintln!("synthscore: {}{hint}", one_line(&e.to_string()));
            exit_code(&e)
        }
    }
}
