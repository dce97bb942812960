//! Skip-gram with negative sampling, trained per era bucket.
//!
//! Vectors are stored row-major, one row of `dim` values per vocabulary
//! entry (the transpose of the usual `d × |V|` column layout).
//!
//! Training is single-threaded and bit-reproducible by default: the same
//! sentences, configuration and seed give identical vectors. Setting
//! [`SgnsConfig::threads`] above one switches to lock-free parallel updates,
//! which are only statistically reproducible.

use std::cell::Cell;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{count_tokens, FrequencyTable, SubtitleDocument};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("{0:?} is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("{0:?} has an all-zero vector")]
    ZeroVector(String),
    #[error("invalid embedding space: {0}")]
    InvalidSpace(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EmbedError> = std::result::Result<T, E>;

/// Token ↔ index mapping with corpus frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vocabulary {
    #[serde(skip)]
    id_of: HashMap<String, usize>,
    token_of: Vec<String>,
    counts: Vec<u64>,
    min_count: u64,
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_count` times, ordered by count
    /// descending and then token ascending.
    pub fn from_counts(table: &FrequencyTable, min_count: u64) -> Result<Self> {
        let ranked: Vec<(&str, u64)> = table
            .ranked()
            .into_iter()
            .filter(|(_, n)| *n >= min_count.max(1))
            .collect();
        if ranked.is_empty() {
            return Err(EmbedError::EmptyVocabulary);
        }
        let mut v = Self::from_entries(
            ranked.iter().map(|(t, n)| (t.to_string(), *n)).collect(),
        )?;
        v.min_count = min_count;
        Ok(v)
    }

    pub fn from_sentences(sentences: &[Vec<String>], min_count: u64) -> Result<Self> {
        let table: FrequencyTable = sentences.iter().flatten().collect();
        Self::from_counts(&table, min_count)
    }

    /// Vocabulary in the given order. Tokens must be unique.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut id_of = HashMap::with_capacity(entries.len());
        let mut token_of = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (i, (tok, n)) in entries.into_iter().enumerate() {
            if id_of.insert(tok.clone(), i).is_some() {
                return Err(EmbedError::InvalidSpace(format!("duplicate token {tok:?}")));
            }
            token_of.push(tok);
            counts.push(n);
        }
        Ok(Vocabulary {
            id_of,
            token_of,
            counts,
            min_count: 0,
        })
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.token_of[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn count_of(&self, token: &str) -> Option<u64> {
        self.id(token).map(|i| self.counts[i])
    }

    pub fn tokens(&self) -> &[String] {
        &self.token_of
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.id_of.contains_key(token)
    }

    fn rebuild_index(&mut self) {
        self.id_of = self
            .token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

/// Vocabulary of a bucket's documents.
pub fn build_vocab(documents: &[SubtitleDocument], min_count: u64) -> Result<Vocabulary> {
    Vocabulary::from_counts(&count_tokens(documents), min_count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: u64,
    pub subsample_t: f64,
    pub seed: u64,
    /// 1 = deterministic sequential training.
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_count: 5,
            subsample_t: 1e-5,
            seed: 1,
            threads: 1,
        }
    }
}

/// Learning rate never decays below this fraction of the initial rate.
const MIN_LR_FRACTION: f64 = 1e-4;

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_string()));
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.window == 0 || self.negatives == 0 || self.min_count == 0 || self.threads == 0 {
            return bad("window, negatives, min_count and threads must be positive");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive");
        }
        if !(self.subsample_t > 0.0 && self.subsample_t <= 1.0) {
            return bad("subsample_t must be in (0, 1]");
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.threads == 1
    }
}

/// How a space was trained, recorded alongside its vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingProvenance {
    pub config: SgnsConfig,
    /// Mean loss per (center, context) pair for each epoch.
    pub epoch_losses: Vec<f64>,
    pub sentences: usize,
    pub training_tokens: u64,
}

/// Vocabulary plus a `|V| × dim` matrix for one era.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    bucket: String,
    vocab: Vocabulary,
    dim: usize,
    vectors: Vec<f64>,
    provenance: Option<TrainingProvenance>,
}

impl EmbeddingSpace {
    pub fn new(bucket: impl Into<String>, vocab: Vocabulary, dim: usize, vectors: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(EmbedError::InvalidSpace(format!("dim {dim} < 2")));
        }
        if vectors.len() != vocab.len() * dim {
            return Err(EmbedError::InvalidSpace(format!(
                "{} values for {} tokens of dim {dim}",
                vectors.len(),
                vocab.len()
            )));
        }
        if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidSpace(format!(
                "non-finite value for {:?}",
                vocab.token(i / dim)
            )));
        }
        Ok(EmbeddingSpace {
            bucket: bucket.into(),
            vocab,
            dim,
            vectors,
            provenance: None,
        })
    }

    /// Builds a space from `(token, vector)` pairs; counts follow row order,
    /// highest first.
    pub fn from_rows<S: AsRef<str>>(bucket: &str, rows: &[(S, Vec<f64>)]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        if rows.iter().any(|r| r.1.len() != dim) {
            return Err(EmbedError::InvalidSpace("ragged rows".into()));
        }
        let n = rows.len() as u64;
        let vocab = Vocabulary::from_entries(
            rows.iter()
                .enumerate()
                .map(|(i, r)| (r.0.as_ref().to_string(), n - i as u64))
                .collect(),
        )?;
        let vectors = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
        Self::new(bucket, vocab, dim, vectors)
    }

    pub fn bucket(&self) -> &str {
        &self.bucket
    }

    pub fn set_bucket(&mut self, bucket: impl Into<String>) {
        self.bucket = bucket.into();
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.id(token).map(|i| self.row(i))
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn provenance(&self) -> Option<&TrainingProvenance> {
        self.provenance.as_ref()
    }

    /// Same vocabulary and metadata with every row replaced by `f(row)`.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut vectors = Vec::with_capacity(self.vectors.len());
        for row in self.vectors.chunks(self.dim) {
            let out = f(row);
            if out.len() != self.dim {
                return Err(EmbedError::InvalidSpace("row map changed dimension".into()));
            }
            vectors.extend(out);
        }
        let mut space = Self::new(self.bucket.clone(), self.vocab.clone(), self.dim, vectors)?;
        space.provenance = self.provenance.clone();
        Ok(space)
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_text(BufWriter::new(file))
    }

    /// `|V| dim` header, then `token v1 … vd` per line.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, tok) in self.vocab.tokens().iter().enumerate() {
            write!(w, "{tok}")?;
            for v in self.row(i) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a text-format space; the bucket name is the file stem.
    pub fn load_text(path: &Path) -> Result<Self> {
        let bucket = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_text(std::fs::File::open(path)?, &bucket)
    }

    /// Reads the text format. Frequencies are not stored in the file, so
    /// each token's count is its reverse rank (the first row gets `|V|`),
    /// matching the usual most-frequent-first ordering of such files.
    pub fn read_text(reader: impl Read, bucket: &str) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines.next().ok_or(EmbedError::Format {
            line: 1,
            message: "missing header".into(),
        })??;
        let parse_usize = |s: Option<&str>, line: usize| -> Result<usize> {
            s.and_then(|x| x.parse().ok()).ok_or(EmbedError::Format {
                line,
                message: "bad header".into(),
            })
        };
        let mut fields = header.split_whitespace();
        let n = parse_usize(fields.next(), 1)?;
        let dim = parse_usize(fields.next(), 1)?;
        let mut entries = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 2;
            let mut parts = line.split_whitespace();
            let tok = parts.next().unwrap().to_string();
            let before = vectors.len();
            for p in parts {
                vectors.push(p.parse::<f64>().map_err(|_| EmbedError::Format {
                    line: line_no,
                    message: format!("bad number {p:?}"),
                })?);
            }
            if vectors.len() - before != dim {
                return Err(EmbedError::Format {
                    line: line_no,
                    message: format!("expected {dim} values, got {}", vectors.len() - before),
                });
            }
            entries.push(tok);
        }
        if entries.len() != n {
            return Err(EmbedError::Format {
                line: 1,
                message: format!("header says {n} rows, found {}", entries.len()),
            });
        }
        let total = entries.len() as u64;
        let vocab = Vocabulary::from_entries(
            entries
                .into_iter()
                .enumerate()
                .map(|(i, t)| (t, total - i as u64))
                .collect(),
        )?;
        Self::new(bucket, vocab, dim, vectors)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            token_of: Vec<String>,
            counts: Vec<u64>,
            min_count: u64,
        }
        let raw = Raw::deserialize(d)?;
        let mut v = Vocabulary {
            id_of: HashMap::new(),
            token_of: raw.token_of,
            counts: raw.counts,
            min_count: raw.min_count,
        };
        v.rebuild_index();
        Ok(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of two vectors, or `None` if either is all zeros.
pub fn cosine_vectors(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine(space: &EmbeddingSpace, x: &str, y: &str) -> Result<f64> {
    let vx = space
        .vector(x)
        .ok_or_else(|| EmbedError::OutOfVocabulary(x.to_string()))?;
    let vy = space
        .vector(y)
        .ok_or_else(|| EmbedError::OutOfVocabulary(y.to_string()))?;
    if norm(vx) == 0.0 {
        return Err(EmbedError::ZeroVector(x.to_string()));
    }
    cosine_vectors(vx, vy).ok_or_else(|| EmbedError::ZeroVector(y.to_string()))
}

/// Draws negative samples from the unigram distribution raised to 3/4.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

pub const UNIGRAM_POWER: f64 = 0.75;

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Self {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(UNIGRAM_POWER)).collect();
        let total: f64 = weights.iter().sum();
        let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc / total
            })
            .collect();
        NegativeSampler {
            probabilities,
            cumulative,
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Seeded uniform initialization in `(-0.5/dim, 0.5/dim)`. Training with
/// zero epochs returns exactly these vectors.
pub fn initial_vectors(vocab_len: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 / dim as f64;
    (0..vocab_len * dim)
        .map(|_| rng.gen_range(-half..half))
        .collect()
}

/// Probability of keeping one occurrence of a word seen `count` times out
/// of `total` training tokens.
pub fn keep_probability(count: u64, total: u64, t: f64) -> f64 {
    let threshold = t * total as f64;
    let c = count as f64;
    (((c / threshold).sqrt() + 1.0) * threshold / c).min(1.0)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Shared weight storage for the SGD kernel.
trait Weights {
    fn get(&self, i: usize) -> f64;
    fn set(&self, i: usize, v: f64);
}

impl Weights for [Cell<f64>] {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self[i].get()
    }
    #[inline]
    fn set(&self, i: usize, v: f64) {
        self[i].set(v)
    }
}

/// Racy relaxed loads and stores, as in lock-free SGD.
impl Weights for [AtomicU64] {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn set(&self, i: usize, v: f64) {
        self[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

struct Trainer<'a> {
    config: &'a SgnsConfig,
    sampler: &'a NegativeSampler,
    keep: &'a [f64],
    total_steps: f64,
}

#[derive(Default)]
struct EpochTally {
    loss: f64,
    pairs: u64,
}

impl Trainer<'_> {
    fn lr(&self, processed: u64) -> f64 {
        let frac = 1.0 - processed as f64 / self.total_steps;
        self.config.initial_lr * frac.max(MIN_LR_FRACTION)
    }

    /// One skip-gram update: `center` predicts `context` against sampled
    /// negatives.
    #[allow(clippy::too_many_arguments)]
    fn train_pair<W: Weights + ?Sized>(
        &self,
        input: &W,
        output: &W,
        center: usize,
        context: usize,
        lr: f64,
        grad: &mut [f64],
        rng: &mut ChaCha8Rng,
        tally: &mut EpochTally,
    ) {
        let d = self.config.dim;
        let in_off = center * d;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for k in 0..=self.config.negatives {
            let (target, label) = if k == 0 {
                (context, 1.0)
            } else {
                let t = self.sampler.sample(rng);
                if t == context {
                    continue;
                }
                (t, 0.0)
            };
            let out_off = target * d;
            let mut f = 0.0;
            for j in 0..d {
                f += input.get(in_off + j) * output.get(out_off + j);
            }
            tally.loss += if label == 1.0 { softplus(-f) } else { softplus(f) };
            let g = (label - sigmoid(f)) * lr;
            for (j, gj) in grad.iter_mut().enumerate() {
                let o = output.get(out_off + j);
                *gj += g * o;
                output.set(out_off + j, o + g * input.get(in_off + j));
            }
        }
        for (j, gj) in grad.iter().enumerate() {
            input.set(in_off + j, input.get(in_off + j) + gj);
        }
        tally.pairs += 1;
    }

    #[allow(clippy::too_many_arguments)]
    fn train_sentence<W: Weights + ?Sized>(
        &self,
        input: &W,
        output: &W,
        sentence: &[usize],
        processed: u64,
        rng: &mut ChaCha8Rng,
        grad: &mut [f64],
        tally: &mut EpochTally,
    ) {
        let kept: Vec<usize> = sentence
            .iter()
            .copied()
            .filter(|&w| self.keep[w] >= 1.0 || rng.gen::<f64>() < self.keep[w])
            .collect();
        let lr = self.lr(processed);
        for (pos, &center) in kept.iter().enumerate() {
            let reach = rng.gen_range(1..=self.config.window);
            let lo = pos.saturating_sub(reach);
            let hi = (pos + reach).min(kept.len() - 1);
            for (ctx_pos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                if ctx_pos != pos {
                    self.train_pair(input, output, center, context, lr, grad, rng, tally);
                }
            }
        }
    }
}

/// Trains SGNS vectors on `sentences`; context windows never cross sentence
/// boundaries.
pub fn train_sgns(sentences: &[Vec<String>], config: &SgnsConfig) -> Result<EmbeddingSpace> {
    config.validate()?;
    let vocab = Vocabulary::from_sentences(sentences, config.min_count)?;
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect();
    let training_tokens: u64 = vocab.counts().iter().sum();
    let sampler = NegativeSampler::new(vocab.counts());
    let keep: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| keep_probability(c, training_tokens, config.subsample_t))
        .collect();
    let trainer = Trainer {
        config,
        sampler: &sampler,
        keep: &keep,
        total_steps: (config.epochs as u64 * training_tokens + 1) as f64,
    };
    let mut input = initial_vectors(vocab.len(), config.dim, config.seed);
    let mut output = vec![0.0; input.len()];

    let epoch_losses = if config.is_deterministic() {
        train_sequential(&trainer, &encoded, &mut input, &mut output)?
    } else {
        train_parallel(&trainer, &encoded, &mut input, &mut output)?
    };

    let mut space = EmbeddingSpace::new("", vocab, config.dim, input)?;
    space.provenance = Some(TrainingProvenance {
        config: config.clone(),
        epoch_losses,
        sentences: encoded.len(),
        training_tokens,
    });
    Ok(space)
}

fn epoch_loss(tally: &EpochTally, epoch: usize) -> Result<f64> {
    let mean = if tally.pairs == 0 {
        0.0
    } else {
        tally.loss / tally.pairs as f64
    };
    if !mean.is_finite() {
        return Err(EmbedError::NonFiniteLoss { epoch });
    }
    Ok(mean)
}

fn train_sequential(
    trainer: &Trainer<'_>,
    encoded: &[Vec<usize>],
    input: &mut [f64],
    output: &mut [f64],
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(trainer.config.seed);
    rng.set_stream(1);
    let input = Cell::from_mut(input).as_slice_of_cells();
    let output = Cell::from_mut(output).as_slice_of_cells();
    let mut grad = vec![0.0; trainer.config.dim];
    let mut processed = 0u64;
    let mut losses = Vec::with_capacity(trainer.config.epochs);
    for epoch in 0..trainer.config.epochs {
        let mut tally = EpochTally::default();
        for sentence in encoded {
            trainer.train_sentence(input, output, sentence, processed, &mut rng, &mut grad, &mut tally);
            processed += sentence.len() as u64;
        }
        losses.push(epoch_loss(&tally, epoch)?);
    }
    Ok(losses)
}

fn train_parallel(
    trainer: &Trainer<'_>,
    encoded: &[Vec<usize>],
    input: &mut [f64],
    output: &mut [f64],
) -> Result<Vec<f64>> {
    let to_atomic = |v: &[f64]| v.iter().map(|x| AtomicU64::new(x.to_bits())).collect::<Vec<_>>();
    let shared_in = to_atomic(input);
    let shared_out = to_atomic(output);
    let threads = trainer.config.threads.min(encoded.len().max(1));
    let chunk = encoded.len().div_ceil(threads).max(1);
    let processed = AtomicU64::new(0);
    let mut losses = Vec::with_capacity(trainer.config.epochs);
    for epoch in 0..trainer.config.epochs {
        let tallies: Vec<EpochTally> = std::thread::scope(|scope| {
            let handles: Vec<_> = encoded
                .chunks(chunk)
                .enumerate()
                .map(|(t, part)| {
                    let (shared_in, shared_out, processed) = (&shared_in, &shared_out, &processed);
                    scope.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(trainer.config.seed);
                        rng.set_stream(1 + (epoch * threads + t) as u64);
                        let mut grad = vec![0.0; trainer.config.dim];
                        let mut tally = EpochTally::default();
                        for sentence in part {
                            let seen = processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                            trainer.train_sentence(
                                shared_in.as_slice(),
                                shared_out.as_slice(),
                                sentence,
                                seen,
                                &mut rng,
                                &mut grad,
                                &mut tally,
                            );
                        }
                        tally
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let total = tallies.iter().fold(EpochTally::default(), |acc, t| EpochTally {
            loss: acc.loss + t.loss,
            pairs: acc.pairs + t.pairs,
        });
        losses.push(epoch_loss(&total, epoch)?);
    }
    for (dst, src) in input.iter_mut().zip(&shared_in) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    for (dst, src) in output.iter_mut().zip(&shared_out) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    Ok(losses)
}

/// Trains one bucket, using each cue as a sentence.
pub fn train_bucket(bucket: &str, documents: &[SubtitleDocument], config: &SgnsConfig) -> Result<EmbeddingSpace> {
    let sentences: Vec<Vec<String>> = documents.iter().flat_map(|d| d.sentences()).collect();
    let mut space = train_sgns(&sentences, config)?;
    space.set_bucket(bucket);
    Ok(space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sentences(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn vocab_threshold_and_order() {
        let mut t = FrequencyTable::new();
        t.add("a", 5);
        t.add("b", 1);
        let v = Vocabulary::from_counts(&t, 2).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        let mut t = FrequencyTable::new();
        t.add("b", 3);
        t.add("a", 3);
        t.add("c", 4);
        let v = Vocabulary::from_counts(&t, 1).unwrap();
        assert_eq!(v.tokens(), ["c", "a", "b"]);
        assert_eq!((v.id("a"), v.id("b")), (Some(1), Some(2)));
        assert!(matches!(
            Vocabulary::from_counts(&FrequencyTable::new(), 1),
            Err(EmbedError::EmptyVocabulary)
        ));
    }

    #[test]
    fn cosine_examples() {
        let s = EmbeddingSpace::from_rows(
            "t",
            &[("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0]), ("z", vec![1.0, 1.0]), ("o", vec![0.0, 0.0])],
        )
        .unwrap();
        assert!((cosine(&s, "x", "x").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&s, "x", "y").unwrap(), 0.0);
        assert!((cosine(&s, "z", "x").unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(cosine(&s, "x", "nope"), Err(EmbedError::OutOfVocabulary(_))));
        assert!(matches!(cosine(&s, "o", "x"), Err(EmbedError::ZeroVector(_))));
        assert!(matches!(cosine(&s, "x", "o"), Err(EmbedError::ZeroVector(_))));
    }

    #[test]
    fn space_invariants() {
        assert!(EmbeddingSpace::from_rows("t", &[("x", vec![1.0])]).is_err());
        assert!(EmbeddingSpace::from_rows("t", &[("x", vec![1.0, f64::NAN])]).is_err());
        assert!(EmbeddingSpace::from_rows("t", &[("x", vec![1.0, 2.0]), ("y", vec![1.0])]).is_err());
        assert!(EmbeddingSpace::from_rows("t", &[("x", vec![1.0, 2.0]), ("x", vec![1.0, 2.0])]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SgnsConfig::default().validate().is_ok());
        for bad in [
            SgnsConfig { dim: 1, ..Default::default() },
            SgnsConfig { window: 0, ..Default::default() },
            SgnsConfig { subsample_t: 0.0, ..Default::default() },
            SgnsConfig { subsample_t: 1.5, ..Default::default() },
            SgnsConfig { initial_lr: -1.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(EmbedError::InvalidConfig(_))));
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let config = SgnsConfig { dim: 8, epochs: 0, min_count: 1, seed: 9, ..Default::default() };
        let s = train_sgns(&sentences(&["a b c", "b c d"]), &config).unwrap();
        assert_eq!(s.vectors(), initial_vectors(4, 8, 9).as_slice());
    }

    #[test]
    fn sampler_distribution() {
        let counts = [10u64, 5, 1, 100];
        let s = NegativeSampler::new(&counts);
        let p = s.probabilities();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..counts.len() {
            let ratio = p[i] / p[0];
            let expected = (counts[i] as f64 / counts[0] as f64).powf(0.75);
            assert!((ratio - expected).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hist = [0usize; 4];
        for _ in 0..200_000 {
            hist[s.sample(&mut rng)] += 1;
        }
        for i in 0..4 {
            assert!((hist[i] as f64 / 200_000.0 - p[i]).abs() < 0.01);
        }
    }

    #[test]
    fn subsampling_keeps_rare_words() {
        assert_eq!(keep_probability(1, 1000, 1e-3), 1.0);
        let p = keep_probability(500, 1000, 1e-3);
        assert!(p > 0.0 && p < 0.1);
    }

    #[test]
    fn text_format_round_trip() {
        let s = EmbeddingSpace::from_rows(
            "old",
            &[("he", vec![0.1, -2.5e-7, 3.0]), ("she", vec![1.0 / 3.0, 0.0, -1.0])],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_text(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("2 3\nhe "));
        let back = EmbeddingSpace::read_text(buf.as_slice(), "old").unwrap();
        assert_eq!(back.vectors(), s.vectors());
        assert_eq!(back.vocab().tokens(), s.vocab().tokens());
        assert_eq!(back.vocab().counts(), [2, 1]);
        assert!(EmbeddingSpace::read_text("2 2\na 1 2\n".as_bytes(), "x").is_err());
        assert!(EmbeddingSpace::read_text("1 2\na 1\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn deterministic_training_is_bit_identical() {
        let data = sentences(&["the cat sat on the mat", "the dog sat on the log", "a cat and a dog"]);
        let config = SgnsConfig { dim: 10, min_count: 1, epochs: 3, seed: 5, ..Default::default() };
        let a = train_sgns(&data, &config).unwrap();
        let b = train_sgns(&data, &config).unwrap();
        assert_eq!(a.vectors(), b.vectors());
        let c = train_sgns(&data, &SgnsConfig { seed: 6, ..config }).unwrap();
        assert_ne!(a.vectors(), c.vectors());
    }

    #[test]
    fn parallel_mode_trains() {
        let data: Vec<Vec<String>> = (0..400)
            .map(|i| sentences(&[if i % 2 == 0 { "a b a b x" } else { "c d c d y" }]).remove(0))
            .collect();
        let config = SgnsConfig {
            dim: 16,
            min_count: 1,
            epochs: 3,
            subsample_t: 1.0,
            threads: 4,
            ..Default::default()
        };
        let s = train_sgns(&data, &config).unwrap();
        assert!(s.vectors().iter().all(|v| v.is_finite()));
        assert!(cosine(&s, "a", "b").unwrap() > cosine(&s, "a", "c").unwrap());
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in prop::collection::vec(-5.0f64..5.0, 4),
            b in prop::collection::vec(-5.0f64..5.0, 4),
            k in 0.01f64..100.0,
        ) {
            prop_assume!(norm(&a) > 1e-6 && norm(&b) > 1e-6);
            let s = EmbeddingSpace::from_rows("t", &[("a", a.clone()), ("b", b.clone())]).unwrap();
            prop_assert_eq!(cosine(&s, "a", "b").unwrap(), cosine(&s, "b", "a").unwrap());
            let scaled: Vec<f64> = a.iter().map(|x| x * k).collect();
            let s2 = EmbeddingSpace::from_rows("t", &[("a", scaled), ("b", b)]).unwrap();
            prop_assert!((cosine(&s, "a", "b").unwrap() - cosine(&s2, "a", "b").unwrap()).abs() < 1e-12);
        }
    }
}
