//! Labeled-dataset harness: loads activities and responses, scores them and
//! reports per-activity agreement between creativity scores and labels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::metrics::{five_number, kendall_tau, mean_absolute_error, pearson, FiveNumber};
use crate::output::{csv_field, format_f64};
use crate::scoring::{score_response, Activity, MetaParameters, ResponseDoc, ScoreBreakdown};

pub const MAX_LABEL: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledResponse {
    pub response: ResponseDoc,
    pub label: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub activities: Vec<Activity>,
    pub responses: Vec<LabeledResponse>,
}

/// One line of the responses JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub activity_id: String,
    pub response_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i64>,
}

/// Maps an integer label 0..=4 linearly onto [0, 1].
pub fn label_to_unit(label: i64) -> Result<f64> {
    if !(0..=i64::from(MAX_LABEL)).contains(&label) {
        return Err(Error::Schema {
            location: "label".into(),
            message: format!("label {label} outside 0..=4"),
        });
    }
    Ok(label as f64 / f64::from(MAX_LABEL))
}

impl LabeledDataset {
    /// Validates records and builds the dataset. `source` names the
    /// responses file in error locations.
    pub fn from_records(
        activities: Vec<Activity>,
        records: Vec<(usize, ResponseRecord)>,
        source: &str,
    ) -> Result<Self> {
        let mut activity_ids = HashSet::new();
        for a in &activities {
            a.validate().map_err(|e| Error::Schema {
                location: format!("activity {}", a.activity_id),
                message: e.to_string(),
            })?;
            if !activity_ids.insert(a.activity_id.as_str()) {
                return Err(Error::Schema {
                    location: format!("activity {}", a.activity_id),
                    message: "duplicate activity_id".into(),
                });
            }
        }
        let mut response_ids = HashSet::new();
        let mut responses = Vec::with_capacity(records.len());
        for (line, rec) in records {
            let location = format!("{source}:{line}");
            if !activity_ids.contains(rec.activity_id.as_str()) {
                return Err(Error::Integrity {
                    location,
                    message: format!("unknown activity_id {:?}", rec.activity_id),
                });
            }
            if !response_ids.insert(rec.response_id.clone()) {
                return Err(Error::Integrity {
                    location,
                    message: format!("duplicate response_id {:?}", rec.response_id),
                });
            }
            let label = match rec.label {
                None => None,
                Some(l) => {
                    label_to_unit(l).map_err(|_| Error::Schema {
                        location: location.clone(),
                        message: format!("label {l} outside 0..=4"),
                    })?;
                    Some(l as u8)
                }
            };
            let response = ResponseDoc::new(rec.response_id, rec.activity_id, rec.text)
                .map_err(|e| Error::Schema { location, message: e.to_string() })?;
            responses.push(LabeledResponse { response, label });
        }
        Ok(LabeledDataset { activities, responses })
    }

    pub fn activity(&self, id: &str) -> Option<&Activity> {
        self.activities.iter().find(|a| a.activity_id == id)
    }

    pub fn labeled_count(&self) -> usize {
        self.responses.iter().filter(|r| r.label.is_some()).count()
    }
}

pub fn load_activities(path: &Path) -> Result<Vec<Activity>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| Error::Schema {
        location: format!("{}:{}", path.display(), e.line()),
        message: e.to_string(),
    })
}

pub fn load_response_records(path: &Path) -> Result<Vec<(usize, ResponseRecord)>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map(|rec| (i + 1, rec)).map_err(|e| Error::Schema {
                location: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads the activities JSON array and the responses JSONL file.
pub fn load_dataset(activities: &Path, responses: &Path) -> Result<LabeledDataset> {
    let acts = load_activities(activities)?;
    let records = load_response_records(responses)?;
    LabeledDataset::from_records(acts, records, &responses.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityMetrics {
    pub activity_id: String,
    pub n: usize,
    pub mae: f64,
    pub pearson: Option<f64>,
    pub kendall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBucket {
    pub activity_id: String,
    pub label: u8,
    #[serde(flatten)]
    pub summary: FiveNumber<f64>,
}

/// Metrics over all labeled responses at once, ignoring activity boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledMetrics {
    pub n: usize,
    pub mae: f64,
    pub pearson: Option<f64>,
    pub kendall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_activity: Vec<ActivityMetrics>,
    pub mean_mae: Option<f64>,
    pub mean_pearson: Option<f64>,
    pub mean_kendall: Option<f64>,
    pub pooled: Option<PooledMetrics>,
    pub buckets: Vec<LabelBucket>,
    pub notes: Vec<String>,
}

/// Unweighted mean of the defined values.
fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Five-number summaries per integer label, ascending. Empty groups are
/// skipped and reported in `notes`.
pub fn bucket_summary(
    groups: &BTreeMap<u8, Vec<f64>>,
    notes: &mut Vec<String>,
) -> Vec<(u8, FiveNumber<f64>)> {
    groups
        .iter()
        .filter_map(|(&label, scores)| match five_number(scores) {
            Some(s) => Some((label, s)),
            None => {
                notes.push(format!("label {label}: empty group skipped"));
                None
            }
        })
        .collect()
}

/// Scores every response (labeled or not) with up to `parallelism` workers.
/// Output order follows the dataset.
pub fn score_dataset(
    dataset: &LabeledDataset,
    provider: &dyn EmbeddingProvider,
    meta: &MetaParameters,
    parallelism: usize,
) -> Result<Vec<ScoreBreakdown>> {
    let activities: HashMap<&str, &Activity> =
        dataset.activities.iter().map(|a| (a.activity_id.as_str(), a)).collect();
    let score_one = |r: &LabeledResponse| {
        let activity = activities[r.response.activity_id.as_str()];
        score_response(activity, &r.response, provider, meta)
    };
    if parallelism <= 1 {
        return dataset.responses.iter().map(score_one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dataset.responses.par_iter().map(score_one).collect())
}

/// Agreement metrics for scores aligned 1:1 with `dataset.responses`.
pub fn evaluate_scored(dataset: &LabeledDataset, scores: &[ScoreBreakdown]) -> Result<EvaluationReport> {
    if scores.len() != dataset.responses.len() {
        return Err(Error::invalid("scores are not aligned with dataset responses"));
    }
    let mut notes = Vec::new();
    let mut per_activity = Vec::new();
    let mut buckets = Vec::new();
    let mut pooled_pairs = Vec::new();

    for activity in &dataset.activities {
        let mut pairs = Vec::new();
        let mut groups: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
        for (r, s) in dataset.responses.iter().zip(scores) {
            if r.response.activity_id != activity.activity_id {
                continue;
            }
            if let Some(label) = r.label {
                pairs.push((s.creativity, label_to_unit(i64::from(label))?));
                groups.entry(label).or_default().push(s.creativity);
            }
        }
        if pairs.is_empty() {
            notes.push(format!("activity {}: no labeled responses, skipped", activity.activity_id));
            continue;
        }
        let (pearson, kendall) = if pairs.len() < 2 {
            notes.push(format!(
                "activity {}: a single labeled response, correlations absent",
                activity.activity_id
            ));
            (None, None)
        } else {
            (pearson(&pairs)?, kendall_tau(&pairs)?)
        };
        if pairs.len() >= 2 && (pearson.is_none() || kendall.is_none()) {
            notes.push(format!(
                "activity {}: constant labels or scores, correlations absent",
                activity.activity_id
            ));
        }
        per_activity.push(ActivityMetrics {
            activity_id: activity.activity_id.clone(),
            n: pairs.len(),
            mae: mean_absolute_error(&pairs)?,
            pearson,
            kendall,
        });
        let mut bucket_notes = Vec::new();
        for (label, summary) in bucket_summary(&groups, &mut bucket_notes) {
            buckets.push(LabelBucket { activity_id: activity.activity_id.clone(), label, summary });
        }
        notes.extend(bucket_notes.into_iter().map(|n| format!("activity {}: {n}", activity.activity_id)));
        pooled_pairs.extend(pairs);
    }

    let pooled = match pooled_pairs.len() {
        0 => None,
        1 => Some(PooledMetrics {
            n: 1,
            mae: mean_absolute_error(&pooled_pairs)?,
            pearson: None,
            kendall: None,
        }),
        n => Some(PooledMetrics {
            n,
            mae: mean_absolute_error(&pooled_pairs)?,
            pearson: pearson(&pooled_pairs)?,
            kendall: kendall_tau(&pooled_pairs)?,
        }),
    };

    Ok(EvaluationReport {
        mean_mae: mean_defined(per_activity.iter().map(|m| Some(m.mae))),
        mean_pearson: mean_defined(per_activity.iter().map(|m| m.pearson)),
        mean_kendall: mean_defined(per_activity.iter().map(|m| m.kendall)),
        per_activity,
        pooled,
        buckets,
        notes,
    })
}

/// Scores the labeled dataset and reports per-activity MAE, Pearson and
/// Kendall τ-b against `label / 4`, their means across activities, and
/// per-label five-number summaries.
pub fn evaluate(
    dataset: &LabeledDataset,
    provider: &dyn EmbeddingProvider,
    meta: &MetaParameters,
) -> Result<EvaluationReport> {
    let scores = score_dataset(dataset, provider, meta, 1)?;
    evaluate_scored(dataset, &scores)
}

pub const BUCKETS_CSV_HEADER: &str = "activity_id,label,n,min,q1,median,q3,max";

pub fn buckets_csv(buckets: &[LabelBucket]) -> String {
    let mut out = String::from(BUCKETS_CSV_HEADER);
    out.push('\n');
    for b in buckets {
        let s = &b.summary;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&b.activity_id),
            b.label,
            s.n,
            format_f64(s.min),
            format_f64(s.q1),
            format_f64(s.median),
            format_f64(s.q3),
            format_f64(s.max),
        ));
    }
    out
}
