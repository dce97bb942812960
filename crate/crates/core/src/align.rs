//! Cross-era alignment by orthogonal Procrustes, and nearest-neighbor drift.
//!
//! A map `R` sends a source-era vector `x` to `R·x` in the target era's
//! coordinates. It minimizes `‖R·Xᵀ − Yᵀ‖_F` over orthogonal matrices, where
//! the rows of `X` and `Y` are the anchor vectors of the two eras. The
//! minimizer is `R = U·Vᵀ` for the SVD `Yᵀ·X = U·Σ·Vᵀ`. Reflections are
//! allowed.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{norm, EmbedError, EmbeddingSpace};
use crate::lexicon::ValenceLexicon;
use crate::metrics::{score_valence, MetricsError};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("the two vocabularies share no tokens")]
    EmptyIntersection,
    #[error("dimension mismatch: source {source_dim}, target {target_dim}")]
    DimensionMismatch { source_dim: usize, target_dim: usize },
    #[error("source has {source_rows} anchor rows, target has {target_rows}")]
    AnchorCountMismatch { source_rows: usize, target_rows: usize },
    #[error("no anchors")]
    NoAnchors,
    #[error("{0:?} is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("{0:?} has an all-zero vector")]
    ZeroVector(String),
    #[error("at least one space is required")]
    NoSpaces,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AlignError> = std::result::Result<T, E>;

pub const DEFAULT_ANCHORS: usize = 10_000;

/// Singular values below this fraction of the largest mark the fit as rank
/// deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Shared tokens ranked by summed frequency in the two spaces (ties broken
/// lexicographically), truncated to `k`.
pub fn select_anchors(a: &EmbeddingSpace, b: &EmbeddingSpace, k: usize) -> Result<Vec<String>> {
    let mut shared: Vec<(&str, u64)> = a
        .vocab()
        .tokens()
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            b.vocab()
                .count_of(t)
                .map(|nb| (t.as_str(), a.vocab().count(i) + nb))
        })
        .collect();
    if shared.is_empty() {
        return Err(AlignError::EmptyIntersection);
    }
    shared.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
    shared.truncate(k);
    Ok(shared.into_iter().map(|(t, _)| t.to_string()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    /// Use anchor vectors as they are.
    Raw,
    /// Length-normalize rows, subtract the column mean, normalize again.
    #[default]
    NormalizeCenter,
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
}

/// Applies `mode` to a matrix whose rows are vectors.
pub fn preprocess(m: &DMatrix<f64>, mode: Preprocessing) -> DMatrix<f64> {
    let mut m = m.clone();
    if mode == Preprocessing::NormalizeCenter {
        normalize_rows(&mut m);
        let mean = m.row_mean();
        for mut row in m.row_iter_mut() {
            row -= &mean;
        }
        normalize_rows(&mut m);
    }
    m
}

/// `‖X·Rᵀ − Y‖_F` for row matrices `X`, `Y`.
pub fn residual(source: &DMatrix<f64>, target: &DMatrix<f64>, rotation: &DMatrix<f64>) -> f64 {
    (source * rotation.transpose() - target).norm()
}

/// Raw solution of one Procrustes problem.
#[derive(Debug, Clone)]
pub struct Procrustes {
    pub rotation: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Residual on the preprocessed anchors with the solved rotation.
    pub residual: f64,
    /// Residual on the preprocessed anchors with the identity.
    pub identity_residual: f64,
    pub rank_deficient: bool,
}

/// Solves for the orthogonal `R` minimizing `‖X·Rᵀ − Y‖_F`, with anchor
/// rows preprocessed according to `mode` first.
pub fn solve_procrustes(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
    mode: Preprocessing,
) -> Result<Procrustes> {
    if source.ncols() != target.ncols() {
        return Err(AlignError::DimensionMismatch {
            source_dim: source.ncols(),
            target_dim: target.ncols(),
        });
    }
    if source.nrows() != target.nrows() {
        return Err(AlignError::AnchorCountMismatch {
            source_rows: source.nrows(),
            target_rows: target.nrows(),
        });
    }
    if source.nrows() == 0 {
        return Err(AlignError::NoAnchors);
    }
    let x = preprocess(source, mode);
    let y = preprocess(target, mode);
    let svd = (y.transpose() * &x).svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let rotation = u * v_t;
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let largest = singular_values.iter().cloned().fold(0.0, f64::max);
    let rank_deficient = singular_values
        .iter()
        .any(|&s| s <= RANK_TOLERANCE * largest.max(f64::MIN_POSITIVE));
    let identity = DMatrix::identity(x.ncols(), x.ncols());
    Ok(Procrustes {
        residual: residual(&x, &y, &rotation),
        identity_residual: residual(&x, &y, &identity),
        rotation,
        singular_values,
        rank_deficient,
    })
}

/// Fitted rotation from one era into another, with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    pub source_bucket: String,
    pub target_bucket: String,
    pub rotation: DMatrix<f64>,
    pub anchor_tokens: Vec<String>,
    pub residual: f64,
    pub identity_residual: f64,
    pub preprocessing: Preprocessing,
    pub singular_values: Vec<f64>,
    pub rank_deficient: bool,
}

#[derive(Serialize, Deserialize)]
struct AlignmentMapJson {
    source_bucket: String,
    target_bucket: String,
    anchor_count: usize,
    residual: f64,
    identity_residual: f64,
    preprocessing: Preprocessing,
    rank_deficient: bool,
    singular_values: Vec<f64>,
    /// Row-major.
    rotation: Vec<Vec<f64>>,
    anchor_tokens: Vec<String>,
}

impl AlignmentMap {
    pub fn dim(&self) -> usize {
        self.rotation.nrows()
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(&self.rotation)
    }

    pub fn to_json(&self) -> Result<String> {
        let json = AlignmentMapJson {
            source_bucket: self.source_bucket.clone(),
            target_bucket: self.target_bucket.clone(),
            anchor_count: self.anchor_tokens.len(),
            residual: self.residual,
            identity_residual: self.identity_residual,
            preprocessing: self.preprocessing,
            rank_deficient: self.rank_deficient,
            singular_values: self.singular_values.clone(),
            rotation: self
                .rotation
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            anchor_tokens: self.anchor_tokens.clone(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: AlignmentMapJson = serde_json::from_str(text)?;
        let d = j.rotation.len();
        if j.rotation.iter().any(|r| r.len() != d) {
            return Err(AlignError::DimensionMismatch {
                source_dim: d,
                target_dim: j.rotation.iter().map(Vec::len).max().unwrap_or(0),
            });
        }
        let rotation = DMatrix::from_row_iterator(d, d, j.rotation.into_iter().flatten());
        Ok(AlignmentMap {
            source_bucket: j.source_bucket,
            target_bucket: j.target_bucket,
            rotation,
            anchor_tokens: j.anchor_tokens,
            residual: j.residual,
            identity_residual: j.identity_residual,
            preprocessing: j.preprocessing,
            singular_values: j.singular_values,
            rank_deficient: j.rank_deficient,
        })
    }
}

pub fn orthogonality_error(r: &DMatrix<f64>) -> f64 {
    let gram = r.transpose() * r - DMatrix::<f64>::identity(r.ncols(), r.ncols());
    gram.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Stacks the vectors of `tokens` as rows.
pub fn anchor_matrix(space: &EmbeddingSpace, tokens: &[String]) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(tokens.len() * space.dim());
    for t in tokens {
        let v = space
            .vector(t)
            .ok_or_else(|| AlignError::OutOfVocabulary(t.clone()))?;
        data.extend_from_slice(v);
    }
    Ok(DMatrix::from_row_slice(tokens.len(), space.dim(), &data))
}

/// Selects anchors and fits the rotation taking `source` into `target`.
pub fn fit_alignment(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    anchors: usize,
    mode: Preprocessing,
) -> Result<AlignmentMap> {
    if source.dim() != target.dim() {
        return Err(AlignError::DimensionMismatch {
            source_dim: source.dim(),
            target_dim: target.dim(),
        });
    }
    let anchor_tokens = select_anchors(source, target, anchors)?;
    let x = anchor_matrix(source, &anchor_tokens)?;
    let y = anchor_matrix(target, &anchor_tokens)?;
    let p = solve_procrustes(&x, &y, mode)?;
    if p.rank_deficient {
        log::warn!(
            "alignment {} -> {} is rank deficient (min singular value {:e})",
            source.bucket(),
            target.bucket(),
            p.singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
        );
    }
    Ok(AlignmentMap {
        source_bucket: source.bucket().to_string(),
        target_bucket: target.bucket().to_string(),
        rotation: p.rotation,
        anchor_tokens,
        residual: p.residual,
        identity_residual: p.identity_residual,
        preprocessing: mode,
        singular_values: p.singular_values,
        rank_deficient: p.rank_deficient,
    })
}

/// Rotates every vector of `space` by the map.
pub fn apply_alignment(space: &EmbeddingSpace, map: &AlignmentMap) -> Result<EmbeddingSpace> {
    if map.dim() != space.dim() {
        return Err(AlignError::DimensionMismatch {
            source_dim: space.dim(),
            target_dim: map.dim(),
        });
    }
    let r = &map.rotation;
    let d = space.dim();
    Ok(space.map_rows(|row| {
        (0..d)
            .map(|i| (0..d).map(|j| r[(i, j)] * row[j]).sum())
            .collect()
    })?)
}

/// Result of aligning an ordered series of eras into the newest one.
#[derive(Debug, Clone)]
pub struct AlignedSeries {
    /// Spaces in input order, all in the newest space's coordinates.
    pub spaces: Vec<EmbeddingSpace>,
    /// `maps[i]` takes era `i` into the aligned era `i + 1`.
    pub maps: Vec<AlignmentMap>,
}

/// Aligns `spaces` (oldest first) into the newest space's frame, chaining
/// each era onto its already-aligned successor.
pub fn align_series(spaces: &[EmbeddingSpace], anchors: usize, mode: Preprocessing) -> Result<AlignedSeries> {
    let newest = spaces.last().ok_or(AlignError::NoSpaces)?;
    let mut aligned = vec![newest.clone()];
    let mut maps = Vec::new();
    for space in spaces.iter().rev().skip(1) {
        let next = aligned.last().unwrap();
        let map = fit_alignment(space, next, anchors, mode)?;
        aligned.push(apply_alignment(space, &map)?);
        maps.push(map);
    }
    aligned.reverse();
    maps.reverse();
    Ok(AlignedSeries {
        spaces: aligned,
        maps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub token: String,
    pub similarity: f64,
}

/// The `n` tokens most cosine-similar to `token`, excluding itself. Ties
/// are broken by token so the result does not depend on vocabulary order.
/// Rows that are all zeros are skipped.
pub fn nearest_neighbors(space: &EmbeddingSpace, token: &str, n: usize) -> Result<Vec<Neighbor>> {
    let q = space
        .vector(token)
        .ok_or_else(|| AlignError::OutOfVocabulary(token.to_string()))?;
    let qn = norm(q);
    if qn == 0.0 {
        return Err(AlignError::ZeroVector(token.to_string()));
    }
    let mut out: Vec<Neighbor> = space
        .vocab()
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.as_str() != token)
        .filter_map(|(i, t)| {
            let row = space.row(i);
            let rn = norm(row);
            (rn > 0.0).then(|| Neighbor {
                token: t.clone(),
                similarity: (crate::embed::dot(q, row) / (qn * rn)).clamp(-1.0, 1.0),
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.token.cmp(&b.token))
    });
    out.truncate(n);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketNeighbors {
    pub bucket: String,
    pub neighbors: Vec<Neighbor>,
    /// Mean lexicon valence of the neighbors, when computed.
    pub mean_valence: Option<f64>,
}

/// A query word's neighbors in each era.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub query: String,
    pub buckets: Vec<BucketNeighbors>,
    /// Eras whose vocabulary lacks the query.
    pub missing_buckets: Vec<String>,
}

pub fn neighbor_report(spaces: &[EmbeddingSpace], token: &str, n: usize) -> Result<NeighborReport> {
    let mut buckets = Vec::new();
    let mut missing_buckets = Vec::new();
    for space in spaces {
        match nearest_neighbors(space, token, n) {
            Ok(neighbors) => buckets.push(BucketNeighbors {
                bucket: space.bucket().to_string(),
                neighbors,
                mean_valence: None,
            }),
            Err(AlignError::OutOfVocabulary(_)) | Err(AlignError::ZeroVector(_)) => {
                missing_buckets.push(space.bucket().to_string())
            }
            Err(e) => return Err(e),
        }
    }
    Ok(NeighborReport {
        query: token.to_string(),
        buckets,
        missing_buckets,
    })
}

/// Mean valence of each era's neighbor tokens.
pub fn neighbor_valence(
    report: &NeighborReport,
    lexicon: &ValenceLexicon,
) -> Vec<(String, Result<f64, MetricsError>)> {
    report
        .buckets
        .iter()
        .map(|b| {
            let tokens: Vec<&str> = b.neighbors.iter().map(|n| n.token.as_str()).collect();
            (b.bucket.clone(), score_valence(&tokens, lexicon).map(|s| s.mean))
        })
        .collect()
}

impl NeighborReport {
    /// Fills `mean_valence` for every era that has at least one neighbor in
    /// the lexicon.
    pub fn with_valence(mut self, lexicon: &ValenceLexicon) -> Self {
        let scores: HashMap<String, Result<f64, MetricsError>> =
            neighbor_valence(&self, lexicon).into_iter().collect();
        for b in &mut self.buckets {
            b.mean_valence = scores.get(&b.bucket).and_then(|r| r.as_ref().ok().copied());
        }
        self
    }

    /// `bucket,rank,token,similarity` rows, ranks starting at 1.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bucket", "rank", "token", "similarity"])?;
        for b in &self.buckets {
            for (i, n) in b.neighbors.iter().enumerate() {
                w.write_record([
                    b.bucket.as_str(),
                    &(i + 1).to_string(),
                    &n.token,
                    &n.similarity.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
