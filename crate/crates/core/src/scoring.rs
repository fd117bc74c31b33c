//! Synthesis scoring: sentence-level subelements, entropy of per-premise
//! projection mass, and the multiplicative creativity score.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::cone::{default_tol, novelty, project_onto_cone, PremiseMatrix};
use crate::embedding::{EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tokens ending in '.' that never close a sentence. Matched case-insensitively.
pub const ABBREVIATIONS: [&str; 8] = ["e.g.", "i.e.", "etc.", "vs.", "Dr.", "Mr.", "Ms.", "cf."];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Premise {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub activity_id: String,
    pub premises: Vec<Premise>,
}

impl Activity {
    pub fn validate(&self) -> Result<()> {
        if self.premises.len() < 2 {
            return Err(Error::invalid(format!(
                "activity {} has {} premise(s), needs at least 2",
                self.activity_id,
                self.premises.len()
            )));
        }
        let mut ids = HashSet::new();
        for p in &self.premises {
            if !ids.insert(p.id.as_str()) {
                return Err(Error::invalid(format!(
                    "activity {} repeats premise id {:?}",
                    self.activity_id, p.id
                )));
            }
            if p.text.trim().is_empty() {
                return Err(Error::invalid(format!(
                    "activity {} premise {:?} has empty text",
                    self.activity_id, p.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseDoc {
    pub response_id: String,
    pub activity_id: String,
    pub text: String,
    pub subelements: Vec<String>,
}

impl ResponseDoc {
    pub fn new(
        response_id: impl Into<String>,
        activity_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self> {
        let text = text.into();
        let subelements = split_subelements(&text)?;
        Ok(ResponseDoc {
            response_id: response_id.into(),
            activity_id: activity_id.into(),
            text,
            subelements,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Element,
    Subelement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

/// Tunable knobs of the creativity model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaParameters {
    /// Exponent on novelty.
    pub alpha: f64,
    /// Exponent on transformation.
    pub beta: f64,
    pub granularity: Granularity,
    pub subscore_aggregation: Aggregation,
}

impl Default for MetaParameters {
    fn default() -> Self {
        MetaParameters {
            alpha: 0.5,
            beta: 0.5,
            granularity: Granularity::Element,
            subscore_aggregation: Aggregation::Mean,
        }
    }
}

impl MetaParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha and beta must be positive, got {} and {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubelementScore {
    pub text: String,
    pub novelty: f64,
    pub transformation: f64,
    pub creativity: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub novelty: f64,
    pub transformation: f64,
    pub creativity: f64,
    pub per_subelement: Vec<SubelementScore>,
    pub meta: MetaParameters,
}

fn is_abbreviation(token: &str) -> bool {
    let token = token.trim_start_matches(['(', '[', '"', '\'', '“', '‘']);
    ABBREVIATIONS.iter().any(|a| a.eq_ignore_ascii_case(token))
}

/// Rule-based sentence split.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace or end of text,
/// unless the whitespace-delimited token ending there is a known
/// abbreviation. Segments are trimmed and empty ones dropped.
pub fn split_subelements(text: &str) -> Result<Vec<String>> {
    if text.trim().is_empty() {
        return Err(Error::degenerate("cannot split empty text"));
    }
    let mut out = Vec::new();
    let mut start = 0;
    let mut token_start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, ch)) = chars.next() {
        if ch.is_whitespace() {
            token_start = i + ch.len_utf8();
            continue;
        }
        if !matches!(ch, '.' | '!' | '?') {
            continue;
        }
        let end = i + ch.len_utf8();
        let at_boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
        if !at_boundary || (ch == '.' && is_abbreviation(&text[token_start..end])) {
            continue;
        }
        let segment = text[start..end].trim();
        if !segment.is_empty() {
            out.push(segment.to_owned());
        }
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_owned());
    }
    Ok(out)
}

/// Normalized Shannon entropy of per-premise projection mass, in [0, 1].
///
/// Coefficients of columns sharing a premise are summed first. Zero total
/// mass yields 0.
pub fn transformation_entropy<T: Scalar>(
    coefficients: &[T],
    group_of: &[usize],
    premise_count: usize,
) -> Result<T> {
    if premise_count < 2 {
        return Err(Error::invalid(format!("need at least 2 premises, got {premise_count}")));
    }
    if coefficients.len() != group_of.len() {
        return Err(Error::invalid("coefficients and group_of differ in length"));
    }
    let mut mass = vec![T::zero(); premise_count];
    for (&c, &g) in coefficients.iter().zip(group_of) {
        if !c.is_finite() || c < T::zero() {
            return Err(Error::invalid(format!("coefficient {c} is negative or non-finite")));
        }
        if g >= premise_count {
            return Err(Error::invalid(format!("column mapped to premise {g} of {premise_count}")));
        }
        mass[g] = mass[g] + c;
    }
    let total = mass.iter().fold(T::zero(), |a, &m| a + m);
    if total == T::zero() {
        return Ok(T::zero());
    }
    let h = mass
        .iter()
        .filter(|&&m| m > T::zero())
        .map(|&m| {
            let q = m / total;
            -(q * q.ln())
        })
        .fold(T::zero(), |a, x| a + x);
    let t = h / T::from_usize_lossy(premise_count).ln();
    Ok(if t <= T::zero() { T::zero() } else { t.min(T::one()) })
}

/// `C = N^α · T^β`.
pub fn combine<T: Scalar>(novelty: T, transformation: T, meta: &MetaParameters) -> Result<T> {
    let unit = |x: T| x >= T::zero() && x <= T::one();
    if !unit(novelty) || !unit(transformation) {
        return Err(Error::invalid(format!(
            "novelty {novelty} and transformation {transformation} must lie in [0, 1]"
        )));
    }
    meta.validate()?;
    Ok(novelty.powf(T::lit(meta.alpha)) * transformation.powf(T::lit(meta.beta)))
}

pub fn aggregate_subscores<T: Scalar>(values: &[T], mode: Aggregation) -> Result<T> {
    if values.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty list"));
    }
    Ok(match mode {
        Aggregation::Mean => {
            values.iter().fold(T::zero(), |a, &v| a + v) / T::from_usize_lossy(values.len())
        }
        Aggregation::Max => values.iter().fold(T::neg_infinity(), |a, &v| a.max(v)),
    })
}

/// Residuals and coefficient shares at or below this are rounding noise.
/// Without the floor, `N^α` with `α < 1` magnifies a 1e-16 residual into a
/// visible creativity score.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Scores one response vector against a premise cone.
pub fn score_vector(
    response: &EmbeddingVector,
    premises: &PremiseMatrix,
    meta: &MetaParameters,
) -> Result<(f64, f64, f64, Vec<f64>)> {
    let proj = project_onto_cone(response, premises, default_tol())?;
    if !proj.converged {
        return Err(Error::NotConverged { iterations: proj.iterations });
    }
    let mut n = novelty(&proj, response)?.value();
    if n <= NOISE_FLOOR {
        n = 0.0;
    }
    let total: f64 = proj.coefficients.iter().sum();
    let weights: Vec<f64> = proj
        .coefficients
        .iter()
        .map(|&c| if c <= NOISE_FLOOR * total { 0.0 } else { c })
        .collect();
    let t = transformation_entropy(&weights, premises.group_of(), premises.premise_count())?;
    let c = combine(n, t, meta)?;
    Ok((n, t, c, proj.coefficients))
}

fn embed_named(provider: &dyn EmbeddingProvider, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
    provider.embed(texts).map_err(|e| match e {
        Error::DegenerateInput(msg) if texts.len() == 1 => {
            Error::degenerate(format!("text {:?}: {msg}", texts[0]))
        }
        other => other,
    })
}

/// Projects the response (or each response subelement) onto the premise
/// cone and reports novelty, transformation and creativity.
pub fn score_response(
    activity: &Activity,
    response: &ResponseDoc,
    provider: &dyn EmbeddingProvider,
    meta: &MetaParameters,
) -> Result<ScoreBreakdown> {
    if response.activity_id != activity.activity_id {
        return Err(Error::invalid(format!(
            "response {} belongs to activity {}, not {}",
            response.response_id, response.activity_id, activity.activity_id
        )));
    }
    activity.validate()?;
    meta.validate()?;

    match meta.granularity {
        Granularity::Element => {
            let premise_texts: Vec<&str> = activity.premises.iter().map(|p| p.text.trim()).collect();
            let columns = embed_named(provider, &premise_texts)?;
            let premises = PremiseMatrix::from_columns(columns)?;
            let text = response.text.trim();
            let r = embed_named(provider, &[text])?.remove(0);
            let (n, t, c, coefficients) = score_vector(&r, &premises, meta)?;
            Ok(ScoreBreakdown {
                novelty: n,
                transformation: t,
                creativity: c,
                per_subelement: vec![SubelementScore {
                    text: text.to_owned(),
                    novelty: n,
                    transformation: t,
                    creativity: c,
                    coefficients,
                }],
                meta: *meta,
            })
        }
        Granularity::Subelement => {
            let mut texts = Vec::new();
            let mut group_of = Vec::new();
            for (j, p) in activity.premises.iter().enumerate() {
                for s in split_subelements(&p.text)? {
                    texts.push(s);
                    group_of.push(j);
                }
            }
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let premises = PremiseMatrix::new(embed_named(provider, &refs)?, group_of)?;

            let subs: Vec<&str> = response.subelements.iter().map(String::as_str).collect();
            let vectors = embed_named(provider, &subs)?;
            let per_subelement = subs
                .iter()
                .zip(&vectors)
                .map(|(text, r)| {
                    let (n, t, c, coefficients) = score_vector(r, &premises, meta)?;
                    Ok(SubelementScore {
                        text: text.to_string(),
                        novelty: n,
                        transformation: t,
                        creativity: c,
                        coefficients,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mode = meta.subscore_aggregation;
            let pick = |f: fn(&SubelementScore) -> f64| {
                aggregate_subscores(&per_subelement.iter().map(f).collect::<Vec<_>>(), mode)
            };
            Ok(ScoreBreakdown {
                novelty: pick(|s| s.novelty)?,
                transformation: pick(|s| s.transformation)?,
                creativity: pick(|s| s.creativity)?,
                per_subelement,
                meta: *meta,
            })
        }
    }
}

/// Every text a batch of responses needs embedded, premises first.
pub fn collect_texts<'a>(
    activities: impl IntoIterator<Item = &'a Activity>,
    responses: impl IntoIterator<Item = &'a ResponseDoc>,
    granularity: Granularity,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for a in activities {
        for p in &a.premises {
            match granularity {
                Granularity::Element => out.push(p.text.trim().to_owned()),
                Granularity::Subelement => out.extend(split_subelements(&p.text)?),
            }
        }
    }
    for r in responses {
        out.push(r.text.trim().to_owned());
        if granularity == Granularity::Subelement {
            out.extend(r.subelements.iter().cloned());
        }
    }
    Ok(out)
}
