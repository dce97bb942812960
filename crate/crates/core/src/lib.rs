//! Diachronic bias measurement over movie-subtitle corpora.
//!
//! The crate is organized as a pipeline of small, independently usable
//! stages:
//!
//! - [`corpus`]: SRT ingestion, tokenization, era bucketing, token counts.
//! - [`lexicon`]: valence ratings, WEAT word sets, gazetteers, surname labels.
//! - [`metrics`]: pronoun and birth ratios, template extraction, mention
//!   counts, surname/religion distributions, valence scoring, Cohen's kappa,
//!   monetary amounts.
//! - [`embed`]: seeded skip-gram with negative sampling per era.
//! - [`align`]: orthogonal Procrustes alignment and nearest-neighbor drift.
//! - [`weat`]: differential association and WEAT effect sizes.
//! - [`pipeline`]: configuration-driven end-to-end runs and report files.
//!
//! Every stage is deterministic given its inputs and seed. See the
//! `examples/` directory of this crate for one runnable program per
//! capability.

pub mod align;
pub mod corpus;
pub mod embed;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod weat;

pub use align::{AlignmentMap, NeighborReport, Preprocessing};
pub use corpus::{
    Cue, FrequencyTable, Industry, SubtitleDocument, TimeBucketedCorpus, BucketRanges,
};
pub use embed::{EmbeddingSpace, SgnsConfig, Vocabulary};
pub use lexicon::{Gazetteer, ReligionMap, ValenceLexicon, WeatSpec};
pub use weat::{WeatOptions, WeatResult};
