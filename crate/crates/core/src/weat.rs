//! Word Embedding Association Test.
//!
//! For a word `c`, the differential association is
//! `g(c) = mean_{a∈A1} cos(c, a) − mean_{b∈A2} cos(c, b)`, and the effect
//! size is `(mean_{s∈S1} g(s) − mean_{t∈S2} g(t)) / std_{c∈S1∪S2} g(c)`.
//! The standard deviation is the population one unless
//! [`StdDev::Sample`] is chosen.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine_vectors, norm, EmbeddingSpace};
use crate::lexicon::WeatSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeatError {
    #[error("{0:?} is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("no word of attribute set {0} is in the vocabulary")]
    EmptyAttributeSet(&'static str),
    #[error("no word of target set {0} is in the vocabulary")]
    EmptyTargetSet(&'static str),
    #[error("target sets have {s1} and {s2} in-vocabulary words")]
    UnbalancedAfterDrop { s1: usize, s2: usize },
    #[error("differential associations have zero spread")]
    DegenerateSpread,
    /// A failure read back from a serialized batch.
    #[error("{0}")]
    Failed(String),
}

pub type Result<T, E = WeatError> = std::result::Result<T, E>;

/// Spreads at or below this are treated as zero.
pub const SPREAD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Out-of-vocabulary targets are dropped; the run fails if the two
    /// target sets end up with different sizes.
    Error,
    /// Out-of-vocabulary targets are dropped, then the larger target set is
    /// trimmed from the end of its list until both sizes match.
    #[default]
    DropAndRebalance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdDev {
    #[default]
    Population,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WeatOptions {
    #[serde(default)]
    pub oov_policy: OovPolicy,
    #[serde(default)]
    pub std_dev: StdDev,
}

/// Why a token was left out of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedToken {
    pub token: String,
    /// `s1`, `s2`, `a1` or `a2`.
    pub set: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    OutOfVocabulary,
    Rebalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatResult {
    pub space: String,
    pub bucket: String,
    pub effect_size: f64,
    pub g_values: BTreeMap<String, f64>,
    pub retained_s1: Vec<String>,
    pub retained_s2: Vec<String>,
    pub dropped_tokens: Vec<DroppedToken>,
    pub options: WeatOptions,
}

impl WeatResult {
    /// Dropped tokens as `set:token` joined by `;`.
    pub fn dropped_summary(&self) -> String {
        self.dropped_tokens
            .iter()
            .map(|d| format!("{}:{}", d.set, d.token))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// In-vocabulary, non-zero vectors of `words`.
fn resolve<'a>(space: &'a EmbeddingSpace, words: &[String]) -> Vec<(&'a [f64], &'a str)> {
    words
        .iter()
        .filter_map(|w| {
            let id = space.vocab().id(w)?;
            let v = space.row(id);
            (norm(v) > 0.0).then(|| (v, space.vocab().token(id)))
        })
        .collect()
}

fn mean_cosine(c: &[f64], set: &[(&[f64], &str)]) -> f64 {
    set.iter()
        .map(|(v, _)| cosine_vectors(c, v).expect("non-zero vectors"))
        .sum::<f64>()
        / set.len() as f64
}

/// `g(c)` over the in-vocabulary words of `a1` and `a2`.
pub fn differential_association(space: &EmbeddingSpace, c: &str, a1: &[String], a2: &[String]) -> Result<f64> {
    let vc = space
        .vector(c)
        .filter(|v| norm(v) > 0.0)
        .ok_or_else(|| WeatError::OutOfVocabulary(c.to_string()))?;
    let r1 = resolve(space, a1);
    let r2 = resolve(space, a2);
    if r1.is_empty() {
        return Err(WeatError::EmptyAttributeSet("a1"));
    }
    if r2.is_empty() {
        return Err(WeatError::EmptyAttributeSet("a2"));
    }
    Ok(mean_cosine(vc, &r1) - mean_cosine(vc, &r2))
}

fn oov(space: &EmbeddingSpace, set: &'static str, words: &[String], out: &mut Vec<DroppedToken>) {
    for w in words {
        if !space.vector(w).is_some_and(|v| norm(v) > 0.0) {
            out.push(DroppedToken {
                token: w.clone(),
                set: set.into(),
                reason: DropReason::OutOfVocabulary,
            });
        }
    }
}

pub fn weat_effect_size(space: &EmbeddingSpace, spec: &WeatSpec, options: WeatOptions) -> Result<WeatResult> {
    weat_effect_size_labeled(space.bucket(), space, spec, options)
}

/// Like [`weat_effect_size`], with `label` recorded as the space identifier.
pub fn weat_effect_size_labeled(
    label: &str,
    space: &EmbeddingSpace,
    spec: &WeatSpec,
    options: WeatOptions,
) -> Result<WeatResult> {
    let a1 = resolve(space, &spec.a1);
    let a2 = resolve(space, &spec.a2);
    if a1.is_empty() {
        return Err(WeatError::EmptyAttributeSet("a1"));
    }
    if a2.is_empty() {
        return Err(WeatError::EmptyAttributeSet("a2"));
    }
    let mut s1 = resolve(space, &spec.s1);
    let mut s2 = resolve(space, &spec.s2);

    let mut dropped = Vec::new();
    for (name, words) in [("s1", &spec.s1), ("s2", &spec.s2), ("a1", &spec.a1), ("a2", &spec.a2)] {
        oov(space, name, words, &mut dropped);
    }
    if s1.is_empty() {
        return Err(WeatError::EmptyTargetSet("s1"));
    }
    if s2.is_empty() {
        return Err(WeatError::EmptyTargetSet("s2"));
    }
    if s1.len() != s2.len() {
        if options.oov_policy == OovPolicy::Error {
            return Err(WeatError::UnbalancedAfterDrop { s1: s1.len(), s2: s2.len() });
        }
        let keep = s1.len().min(s2.len());
        for (name, set) in [("s1", &mut s1), ("s2", &mut s2)] {
            for (_, t) in set.drain(keep..) {
                dropped.push(DroppedToken {
                    token: t.to_string(),
                    set: name.into(),
                    reason: DropReason::Rebalanced,
                });
            }
        }
    }

    let g = |c: &[f64]| mean_cosine(c, &a1) - mean_cosine(c, &a2);
    let g1: Vec<f64> = s1.iter().map(|(v, _)| g(v)).collect();
    let g2: Vec<f64> = s2.iter().map(|(v, _)| g(v)).collect();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;

    let all: Vec<f64> = g1.iter().chain(&g2).copied().collect();
    let mu = mean(&all);
    let ss: f64 = all.iter().map(|x| (x - mu) * (x - mu)).sum();
    let denom = match options.std_dev {
        StdDev::Population => all.len() as f64,
        StdDev::Sample => (all.len() - 1) as f64,
    };
    let spread = (ss / denom).sqrt();
    if spread.is_nan() || spread <= SPREAD_TOLERANCE {
        return Err(WeatError::DegenerateSpread);
    }

    let g_values = s1
        .iter()
        .zip(&g1)
        .chain(s2.iter().zip(&g2))
        .map(|((_, t), g)| (t.to_string(), *g))
        .collect();
    Ok(WeatResult {
        space: label.to_string(),
        bucket: space.bucket().to_string(),
        effect_size: (mean(&g1) - mean(&g2)) / spread,
        g_values,
        retained_s1: s1.iter().map(|(_, t)| t.to_string()).collect(),
        retained_s2: s2.iter().map(|(_, t)| t.to_string()).collect(),
        dropped_tokens: dropped,
        options,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatRow {
    pub space: String,
    pub bucket: String,
    #[serde(with = "row_outcome")]
    pub outcome: Result<WeatResult>,
}

mod row_outcome {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "snake_case")]
    enum Outcome {
        Ok(WeatResult),
        Failed(String),
    }

    pub fn serialize<S: Serializer>(r: &Result<WeatResult>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Ok(v) => Outcome::Ok(v.clone()),
            Err(e) => Outcome::Failed(e.to_string()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Result<WeatResult>, D::Error> {
        Ok(match Outcome::deserialize(d)? {
            Outcome::Ok(v) => Ok(v),
            Outcome::Failed(m) => Err(WeatError::Failed(m)),
        })
    }
}

/// One row per input space plus the mean over successful rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatBatch {
    pub rows: Vec<WeatRow>,
    pub mean_effect_size: Option<f64>,
    pub aggregation: String,
}

pub const AGGREGATION_NOTE: &str = "unweighted mean of effect sizes over the successful spaces of this batch";

/// Runs every space independently; a failure marks its row and the batch
/// carries on.
pub fn weat_batch(spaces: &[(&str, &EmbeddingSpace)], spec: &WeatSpec, options: WeatOptions) -> WeatBatch {
    let rows: Vec<WeatRow> = spaces
        .par_iter()
        .map(|(label, space)| WeatRow {
            space: label.to_string(),
            bucket: space.bucket().to_string(),
            outcome: weat_effect_size_labeled(label, space, spec, options),
        })
        .collect();
    let mut ok: Vec<(&str, &str, f64)> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|w| (r.bucket.as_str(), r.space.as_str(), w.effect_size)))
        .collect();
    ok.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mean_effect_size =
        (!ok.is_empty()).then(|| ok.iter().map(|r| r.2).sum::<f64>() / ok.len() as f64);
    WeatBatch {
        rows,
        mean_effect_size,
        aggregation: AGGREGATION_NOTE.to_string(),
    }
}

impl WeatBatch {
    /// `space,bucket,effect_size,dropped`. Failed rows leave `effect_size`
    /// empty and put the error in `dropped`.
    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["space", "bucket", "effect_size", "dropped"])?;
        for r in &self.rows {
            match &r.outcome {
                Ok(res) => w.write_record([
                    r.space.as_str(),
                    &r.bucket,
                    &res.effect_size.to_string(),
                    &res.dropped_summary(),
                ])?,
                Err(e) => w.write_record([r.space.as_str(), &r.bucket, "", &format!("failed: {e}")])?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
