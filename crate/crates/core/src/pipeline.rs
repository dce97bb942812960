//! Configuration-driven end-to-end runs.
//!
//! A [`RunConfig`] is read from TOML. Relative paths in it are resolved
//! against the config file's directory. [`run_pipeline`] runs the stages in
//! order (ingest, metrics, train, align, neighbors, weat) and writes every
//! report under the output directory.
//!
//! ```toml
//! manifest = "manifest.csv"
//! output_dir = "out"
//! religion_map = "religion_map.csv"
//! births = "births.csv"
//! query_tokens = ["dowry", "doctor"]
//!
//! [buckets]
//! old = [1950, 1969]
//! mid = [1970, 1999]
//! new = [2000, 2020]
//!
//! [sgns]
//! dim = 32
//! min_count = 2
//!
//! [weat]
//! builtin = "gender-occupations"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::align::{align_series, neighbor_report, Preprocessing, DEFAULT_ANCHORS};
use crate::corpus::{bucketize, count_tokens, ingest, read_manifest, BucketRanges, Industry, SubtitleDocument, TimeBucketedCorpus};
use crate::embed::{train_bucket, EmbedError, EmbeddingSpace, SgnsConfig};
use crate::lexicon::{
    builtin_weat_gender_occupations, load_gazetteer, load_religion_map, load_valence_lexicon, Gazetteer, Religion,
    ReligionMap, ValenceLexicon, WeatSpec,
};
use crate::metrics::{
    apply_birth_annotations, average_amount, childbirth_candidates_in, compute_mpr, count_births, count_mentions,
    read_birth_annotations, religion_distribution, surnames_in, BirthLabel, MentionGranularity, MetricsError,
    PronounCounts, UnitTable,
};
use crate::weat::{weat_batch, OovPolicy, StdDev, WeatBatch, WeatError, WeatOptions, WeatRow};

/// Overrides `sgns.seed` when set.
pub const SEED_ENV: &str = "DIACHRON_SEED";
pub const LOCK_FILE: &str = ".diachron.lock";
pub const BUILTIN_GENDER_OCCUPATIONS: &str = "gender-occupations";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{0}` is required")]
    Missing(&'static str),
    #[error("config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl PipelineError {
    /// 2 for configuration and usage problems, 1 for analysis failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Locked(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

fn stage_err<E: std::error::Error + Send + Sync + 'static>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: Box::new(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct WeatConfig {
    /// Name of a built-in spec; only `gender-occupations` exists.
    pub builtin: Option<String>,
    /// Path to a `{"s1":..,"s2":..,"a1":..,"a2":..}` file.
    pub spec: Option<PathBuf>,
    #[serde(default)]
    pub oov_policy: OovPolicy,
    #[serde(default)]
    pub std_dev: StdDev,
    /// Document subsets tested in addition to the whole corpus (`all`).
    #[serde(default)]
    pub partitions: Vec<Partition>,
}

impl WeatConfig {
    pub fn options(&self) -> WeatOptions {
        WeatOptions {
            oov_policy: self.oov_policy,
            std_dev: self.std_dev,
        }
    }
}

/// A labeled subset of the corpus, e.g. one industry or one genre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub label: String,
    pub industry: Option<Industry>,
    pub genre: Option<String>,
}

impl Partition {
    pub fn matches(&self, doc: &SubtitleDocument) -> bool {
        self.industry.is_none_or(|i| doc.industry == i) && self.genre.as_deref().is_none_or(|g| doc.has_genre(g))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub buckets: BucketRanges,
    /// `token,valence` CSV; the bundled test lexicon when absent.
    pub valence_lexicon: Option<PathBuf>,
    /// `canonical,kind,aliases` CSV; the bundled India gazetteer when absent.
    pub gazetteer: Option<PathBuf>,
    pub religion_map: Option<PathBuf>,
    /// `film_id,cue_index,gender` annotations for childbirth cues.
    pub births: Option<PathBuf>,
    /// Text samples for monetary-amount averaging, one per line.
    pub amounts: Option<PathBuf>,
    #[serde(default)]
    pub mention_granularity: MentionGranularity,
    #[serde(default)]
    pub sgns: SgnsConfig,
    #[serde(default = "default_anchors")]
    pub anchors: usize,
    #[serde(default)]
    pub alignment: Preprocessing,
    #[serde(default)]
    pub query_tokens: Vec<String>,
    #[serde(default = "default_neighbors")]
    pub neighbors: usize,
    #[serde(default)]
    pub weat: WeatConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_anchors() -> usize {
    DEFAULT_ANCHORS
}

fn default_neighbors() -> usize {
    10
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut c: RunConfig = toml::from_str(text)?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    /// Reads the file and applies the seed override from the environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c = Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))?;
        c.apply_env()?;
        Ok(c)
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.sgns.seed = v.trim().parse().map_err(|_| ConfigError::Invalid {
                field: "sgns.seed",
                message: format!("{SEED_ENV}={v:?} is not an unsigned integer"),
            })?;
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn output_path(&self) -> Result<PathBuf, ConfigError> {
        Ok(self.resolve(self.output_dir.as_ref().ok_or(ConfigError::Missing("output_dir"))?))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let manifest = self.manifest.as_ref().ok_or(ConfigError::Missing("manifest"))?;
        self.output_path()?;
        let exists = |field: &'static str, p: &Option<PathBuf>| match p {
            Some(p) if !self.resolve(p).is_file() => Err(ConfigError::Invalid {
                field,
                message: format!("{} does not exist", self.resolve(p).display()),
            }),
            _ => Ok(()),
        };
        exists("manifest", &Some(manifest.clone()))?;
        exists("valence_lexicon", &self.valence_lexicon)?;
        exists("gazetteer", &self.gazetteer)?;
        exists("religion_map", &self.religion_map)?;
        exists("births", &self.births)?;
        exists("amounts", &self.amounts)?;
        exists("weat.spec", &self.weat.spec)?;
        if self.buckets.ranges().is_empty() {
            return Err(ConfigError::Invalid {
                field: "buckets",
                message: "at least one bucket is required".into(),
            });
        }
        self.sgns.validate().map_err(|e| ConfigError::Invalid {
            field: "sgns",
            message: e.to_string(),
        })?;
        if self.anchors == 0 {
            return Err(ConfigError::Invalid {
                field: "anchors",
                message: "must be positive".into(),
            });
        }
        if self.neighbors == 0 {
            return Err(ConfigError::Invalid {
                field: "neighbors",
                message: "must be positive".into(),
            });
        }
        match (&self.weat.builtin, &self.weat.spec) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid {
                    field: "weat",
                    message: "set either builtin or spec, not both".into(),
                })
            }
            (Some(b), None) if b != BUILTIN_GENDER_OCCUPATIONS => {
                return Err(ConfigError::Invalid {
                    field: "weat.builtin",
                    message: format!("unknown builtin {b:?}"),
                })
            }
            _ => {}
        }
        let mut labels = std::collections::HashSet::new();
        for p in &self.weat.partitions {
            if p.label == "all" || !labels.insert(&p.label) {
                return Err(ConfigError::Invalid {
                    field: "weat.partitions",
                    message: format!("label {:?} is reserved or repeated", p.label),
                });
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of every field except the
    /// output directory.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }

    fn weat_spec(&self) -> Result<Option<WeatSpec>, PipelineError> {
        match (&self.weat.builtin, &self.weat.spec) {
            (Some(_), _) => Ok(Some(builtin_weat_gender_occupations())),
            (None, Some(p)) => WeatSpec::load(&self.resolve(p)).map(Some).map_err(stage_err("weat")),
            (None, None) => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Files written, relative to the output directory, in write order.
    pub outputs: Vec<String>,
    pub stage_times: Vec<StageTime>,
    pub warnings: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
}

pub const REPORT_FILE: &str = "run_report.json";

/// Held while a run writes into an output directory.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(stage_err("setup"))?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(dir.to_path_buf())),
            Err(e) => Err(stage_err("setup")(e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MprRow {
    pub bucket: String,
    /// An industry name, or `all`.
    pub industry: String,
    pub documents: usize,
    pub he: u64,
    pub him: u64,
    pub she: u64,
    pub her: u64,
    pub mpr: Option<f64>,
}

pub fn mpr_rows(corpus: &TimeBucketedCorpus) -> Vec<MprRow> {
    let row = |bucket: &str, industry: String, docs: &[&SubtitleDocument]| {
        let c = PronounCounts::from_table(&count_tokens(docs.iter().copied()));
        MprRow {
            bucket: bucket.to_string(),
            industry,
            documents: docs.len(),
            he: c.he,
            him: c.him,
            she: c.she,
            her: c.her,
            mpr: compute_mpr(&c).ok(),
        }
    };
    let mut rows = Vec::new();
    for (bucket, docs) in corpus.buckets() {
        let all: Vec<&SubtitleDocument> = docs.iter().collect();
        rows.push(row(bucket, "all".into(), &all));
        let mut by_industry: BTreeMap<Industry, Vec<&SubtitleDocument>> = BTreeMap::new();
        for d in docs {
            by_industry.entry(d.industry).or_default().push(d);
        }
        for (industry, docs) in by_industry {
            rows.push(row(bucket, industry.to_string(), &docs));
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthCandidateRow {
    pub bucket: String,
    pub film_id: String,
    pub cue_index: u32,
    pub label: BirthLabel,
    pub dialogue: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbrRow {
    pub bucket: String,
    pub boy: u64,
    pub girl: u64,
    pub unlabeled: u64,
    pub mbr: Option<f64>,
}

/// Childbirth candidates (with annotations applied) and per-bucket MBR.
pub fn mbr_rows(
    corpus: &TimeBucketedCorpus,
    annotations: Option<&std::collections::HashMap<(String, u32), BirthLabel>>,
) -> (Vec<BirthCandidateRow>, Vec<MbrRow>) {
    let mut candidates = Vec::new();
    let mut rows = Vec::new();
    for (bucket, docs) in corpus.buckets() {
        let mut records = childbirth_candidates_in(bucket, docs);
        if let Some(a) = annotations {
            apply_birth_annotations(&mut records, a);
        }
        let c = count_births(&records);
        rows.push(MbrRow {
            bucket: bucket.to_string(),
            boy: c.boy,
            girl: c.girl,
            unlabeled: c.unlabeled,
            mbr: crate::metrics::compute_mbr(&records).ok(),
        });
        candidates.extend(records.into_iter().map(|r| BirthCandidateRow {
            bucket: r.bucket,
            film_id: r.film_id,
            cue_index: r.cue_index,
            label: r.gender_label,
            dialogue: r.dialogue,
        }));
    }
    (candidates, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionRow {
    pub bucket: String,
    pub place: String,
    pub kind: String,
    pub count: u64,
    pub documents: usize,
}

/// One row per bucket and gazetteer entry, zero counts included.
pub fn mention_rows(corpus: &TimeBucketedCorpus, gazetteer: &Gazetteer, granularity: MentionGranularity) -> Vec<MentionRow> {
    let report = count_mentions(corpus, gazetteer, granularity);
    let mut rows = Vec::new();
    for b in &report.buckets {
        for (place, entry) in gazetteer.entries() {
            rows.push(MentionRow {
                bucket: b.bucket.clone(),
                place: place.to_string(),
                kind: entry.kind.to_string(),
                count: b.counts.get(place).copied().unwrap_or(0),
                documents: b.documents,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurnameRow {
    pub bucket: String,
    /// `honorific` for mr./mrs./dr./doctor, `doctor` for dr./doctor only.
    pub pattern: String,
    pub surname: String,
    pub count: u64,
}

pub fn surname_rows(corpus: &TimeBucketedCorpus) -> Vec<SurnameRow> {
    let mut rows = Vec::new();
    for (bucket, docs) in corpus.buckets() {
        for (pattern, doctor_only) in [("honorific", false), ("doctor", true)] {
            let table = surnames_in(docs, doctor_only);
            rows.extend(table.ranked().into_iter().map(|(s, n)| SurnameRow {
                bucket: bucket.to_string(),
                pattern: pattern.to_string(),
                surname: s.to_string(),
                count: n,
            }));
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReligionRow {
    pub bucket: String,
    pub label: String,
    pub percent: f64,
    pub mapped_occurrences: u64,
    pub unmapped_occurrences: u64,
    pub coverage: f64,
}

/// Rows for every label in every bucket that has at least one mapped
/// surname; the other buckets come back in the second list.
pub fn religion_rows(corpus: &TimeBucketedCorpus, map: &ReligionMap) -> (Vec<ReligionRow>, Vec<String>) {
    let mut rows = Vec::new();
    let mut empty = Vec::new();
    for (bucket, docs) in corpus.buckets() {
        match religion_distribution(&surnames_in(docs, false), map) {
            Ok(d) => rows.extend(Religion::ALL.into_iter().map(|label| ReligionRow {
                bucket: bucket.to_string(),
                label: label.to_string(),
                percent: d.percentages.get(&label).copied().unwrap_or(0.0),
                mapped_occurrences: d.mapped_occurrences,
                unmapped_occurrences: d.unmapped_occurrences,
                coverage: d.coverage,
            })),
            Err(MetricsError::NoMappedSurnames) => empty.push(bucket.to_string()),
            Err(e) => unreachable!("religion_distribution only fails on empty mappings: {e}"),
        }
    }
    (rows, empty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmountRow {
    /// 1-based line number, or `mean` for the summary row.
    pub sample: String,
    pub first_amount: Option<f64>,
    /// Every amount in the sample, `;`-separated.
    pub amounts: String,
}

pub fn amount_rows(samples: &[String], units: &UnitTable) -> Vec<AmountRow> {
    let mut rows: Vec<AmountRow> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let all = crate::metrics::extract_monetary_amounts_with(s, units);
            AmountRow {
                sample: (i + 1).to_string(),
                first_amount: all.first().copied(),
                amounts: all.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            }
        })
        .collect();
    rows.push(AmountRow {
        sample: "mean".into(),
        first_amount: average_amount(samples, units).mean,
        amounts: String::new(),
    });
    rows
}

/// Serializes `rows` as CSV with a header taken from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Keeps file names portable: anything but ASCII alphanumerics, `-` and
/// `_` becomes `_`.
pub fn file_stem_for(token: &str) -> String {
    token
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

struct Run<'a> {
    config: &'a RunConfig,
    out: PathBuf,
    report: RunReport,
}

impl Run<'_> {
    fn record(&mut self, rel: impl Into<String>) {
        self.report.outputs.push(rel.into());
    }

    fn csv<T: Serialize>(&mut self, stage: &'static str, rel: &str, rows: &[T]) -> Result<(), PipelineError> {
        write_rows(&self.out.join(rel), rows).map_err(stage_err(stage))?;
        self.record(rel);
        Ok(())
    }

    fn text(&mut self, stage: &'static str, rel: &str, body: &str) -> Result<(), PipelineError> {
        let path = self.out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(stage_err(stage))?;
        }
        fs::write(path, body).map_err(stage_err(stage))?;
        self.record(rel);
        Ok(())
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.report.warnings.push(message);
    }

    fn timed<T>(
        &mut self,
        stage: &'static str,
        f: impl FnOnce(&mut Self) -> Result<T, PipelineError>,
    ) -> Result<T, PipelineError> {
        let start = Instant::now();
        let result = f(self);
        self.report.stage_times.push(StageTime {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if let Err(e) = &result {
            self.report.failed_stage = Some(stage.to_string());
            self.report.error = Some(e.to_string());
        }
        result
    }

    fn write_report(&mut self) -> Result<(), PipelineError> {
        let json = serde_json::to_string_pretty(&self.report).map_err(stage_err("report"))?;
        fs::write(self.out.join(REPORT_FILE), json).map_err(stage_err("report"))
    }
}

struct Inputs {
    lexicon: ValenceLexicon,
    gazetteer: Gazetteer,
    religion: Option<ReligionMap>,
    births: Option<std::collections::HashMap<(String, u32), BirthLabel>>,
    amounts: Option<Vec<String>>,
}

fn load_inputs(run: &mut Run) -> Result<Inputs, PipelineError> {
    let c = run.config;
    let lexicon = match &c.valence_lexicon {
        Some(p) => {
            let load = load_valence_lexicon(&c.resolve(p)).map_err(stage_err("load"))?;
            if load.duplicates > 0 {
                run.warn(format!("valence lexicon repeats {} tokens", load.duplicates));
            }
            if load.skipped_multiword > 0 {
                run.warn(format!("valence lexicon: skipped {} multi-word entries", load.skipped_multiword));
            }
            load.lexicon
        }
        None => ValenceLexicon::bundled_test(),
    };
    let gazetteer = match &c.gazetteer {
        Some(p) => load_gazetteer(&c.resolve(p)).map_err(stage_err("load"))?,
        None => Gazetteer::bundled_india(),
    };
    let religion = c
        .religion_map
        .as_ref()
        .map(|p| load_religion_map(&c.resolve(p)))
        .transpose()
        .map_err(stage_err("load"))?;
    let births = match &c.births {
        Some(p) => {
            let f = fs::File::open(c.resolve(p)).map_err(stage_err("load"))?;
            Some(read_birth_annotations(f).map_err(stage_err("load"))?)
        }
        None => None,
    };
    let amounts = match &c.amounts {
        Some(p) => {
            let text = fs::read_to_string(c.resolve(p)).map_err(stage_err("load"))?;
            Some(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())
        }
        None => None,
    };
    Ok(Inputs {
        lexicon,
        gazetteer,
        religion,
        births,
        amounts,
    })
}

fn stage_ingest(run: &mut Run) -> Result<TimeBucketedCorpus, PipelineError> {
    let c = run.config;
    let manifest = c.resolve(c.manifest.as_ref().expect("validated"));
    let entries = read_manifest(&manifest).map_err(stage_err("ingest"))?;
    let docs = ingest(&entries).map_err(stage_err("ingest"))?;
    let corpus = bucketize(docs, &c.buckets).map_err(stage_err("ingest"))?;
    if !corpus.unassigned().is_empty() {
        let ids: Vec<&str> = corpus.unassigned().iter().map(|d| d.film_id.as_str()).collect();
        run.warn(format!("{} films fall outside every bucket: {}", ids.len(), ids.join(", ")));
    }
    Ok(corpus)
}

fn stage_metrics(run: &mut Run, corpus: &TimeBucketedCorpus, inputs: &Inputs) -> Result<(), PipelineError> {
    run.csv("metrics", "mpr.csv", &mpr_rows(corpus))?;

    let (candidates, mbr) = mbr_rows(corpus, inputs.births.as_ref());
    run.csv("metrics", "birth_candidates.csv", &candidates)?;
    run.csv("metrics", "mbr.csv", &mbr)?;

    run.csv(
        "metrics",
        "mentions.csv",
        &mention_rows(corpus, &inputs.gazetteer, run.config.mention_granularity),
    )?;
    run.csv("metrics", "surnames.csv", &surname_rows(corpus))?;

    match &inputs.religion {
        Some(map) => {
            let (rows, empty) = religion_rows(corpus, map);
            if !empty.is_empty() {
                run.warn(format!("no mapped surnames in buckets: {}", empty.join(", ")));
            }
            run.csv("metrics", "religion.csv", &rows)?;
        }
        None => run.warn("no religion_map configured; religion.csv not written".into()),
    }

    match &inputs.amounts {
        Some(samples) => run.csv("metrics", "amounts.csv", &amount_rows(samples, &UnitTable::default()))?,
        None => run.warn("no amounts input configured; amounts.csv not written".into()),
    }
    Ok(())
}

/// Trains one space per non-empty bucket, oldest first.
fn train_spaces(
    run: &mut Run,
    corpus: &TimeBucketedCorpus,
    keep: impl Fn(&SubtitleDocument) -> bool,
    label: &str,
) -> Result<Vec<EmbeddingSpace>, PipelineError> {
    let mut spaces = Vec::new();
    for (bucket, docs) in corpus.buckets() {
        let docs: Vec<SubtitleDocument> = docs.iter().filter(|d| keep(d)).cloned().collect();
        match train_bucket(bucket, &docs, &run.config.sgns) {
            Ok(space) => spaces.push(space),
            Err(EmbedError::EmptyVocabulary) => {
                run.warn(format!("{label}/{bucket}: no token reaches min_count; no embedding trained"))
            }
            Err(e) => return Err(stage_err("train")(e)),
        }
    }
    Ok(spaces)
}

fn stage_train(run: &mut Run, corpus: &TimeBucketedCorpus) -> Result<Vec<EmbeddingSpace>, PipelineError> {
    let spaces = train_spaces(run, corpus, |_| true, "all")?;
    fs::create_dir_all(run.out.join("embeddings")).map_err(stage_err("train"))?;
    for s in &spaces {
        let rel = format!("embeddings/{}.vec", s.bucket());
        s.save_text(&run.out.join(&rel)).map_err(stage_err("train"))?;
        run.record(rel);
        if let Some(p) = s.provenance() {
            let losses: Vec<String> = p.epoch_losses.iter().map(|l| format!("{l:.6}")).collect();
            log::info!("{}: epoch losses {}", s.bucket(), losses.join(" "));
        }
    }
    Ok(spaces)
}

fn stage_align(run: &mut Run, spaces: &[EmbeddingSpace]) -> Result<Vec<EmbeddingSpace>, PipelineError> {
    if spaces.len() < 2 {
        run.warn("fewer than two trained buckets; nothing to align".into());
        return Ok(spaces.to_vec());
    }
    let series = align_series(spaces, run.config.anchors, run.config.alignment).map_err(stage_err("align"))?;
    fs::create_dir_all(run.out.join("embeddings/aligned")).map_err(stage_err("align"))?;
    for map in &series.maps {
        if map.rank_deficient {
            run.warn(format!("alignment {} -> {} is rank deficient", map.source_bucket, map.target_bucket));
        }
        let json = map.to_json().map_err(stage_err("align"))?;
        run.text("align", &format!("alignment/{}_to_{}.json", map.source_bucket, map.target_bucket), &json)?;
    }
    for s in &series.spaces {
        let rel = format!("embeddings/aligned/{}.vec", s.bucket());
        s.save_text(&run.out.join(&rel)).map_err(stage_err("align"))?;
        run.record(rel);
    }
    Ok(series.spaces)
}

fn stage_neighbors(run: &mut Run, aligned: &[EmbeddingSpace], lexicon: &ValenceLexicon) -> Result<(), PipelineError> {
    if run.config.query_tokens.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(run.out.join("neighbors")).map_err(stage_err("neighbors"))?;
    for token in &run.config.query_tokens {
        let report = neighbor_report(aligned, token, run.config.neighbors)
            .map_err(stage_err("neighbors"))?
            .with_valence(lexicon);
        if !report.missing_buckets.is_empty() {
            run.warn(format!("{token:?} is missing from buckets: {}", report.missing_buckets.join(", ")));
        }
        let stem = file_stem_for(token);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).map_err(stage_err("neighbors"))?;
        run.text("neighbors", &format!("neighbors/{stem}.csv"), &String::from_utf8(buf).expect("csv is utf-8"))?;
        let json = report.to_json().map_err(stage_err("neighbors"))?;
        run.text("neighbors", &format!("neighbors/{stem}.json"), &json)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionBatch {
    pub partition: String,
    pub batch: WeatBatch,
}

fn stage_weat(run: &mut Run, corpus: &TimeBucketedCorpus, spaces: &[EmbeddingSpace]) -> Result<(), PipelineError> {
    let Some(spec) = run.config.weat_spec()? else {
        run.warn("no WEAT spec configured; weat.csv not written".into());
        return Ok(());
    };
    let options = run.config.weat.options();
    let mut batches = Vec::new();
    let labeled: Vec<(&str, &EmbeddingSpace)> = spaces.iter().map(|s| ("all", s)).collect();
    batches.push(PartitionBatch {
        partition: "all".into(),
        batch: weat_batch(&labeled, &spec, options),
    });
    for p in run.config.weat.partitions.clone() {
        let trained = train_spaces(run, corpus, |d| p.matches(d), &p.label)?;
        let labeled: Vec<(&str, &EmbeddingSpace)> = trained.iter().map(|s| (p.label.as_str(), s)).collect();
        let mut batch = weat_batch(&labeled, &spec, options);
        for (bucket, _) in corpus.buckets() {
            if !trained.iter().any(|s| s.bucket() == bucket) {
                batch.rows.push(WeatRow {
                    space: p.label.clone(),
                    bucket: bucket.to_string(),
                    outcome: Err(WeatError::Failed("no embedding for this partition and bucket".into())),
                });
            }
        }
        let order: Vec<&str> = corpus.ranges().names().collect();
        batch.rows.sort_by_key(|r| order.iter().position(|b| *b == r.bucket));
        batches.push(PartitionBatch {
            partition: p.label.clone(),
            batch,
        });
    }

    for b in &batches {
        for r in &b.batch.rows {
            match &r.outcome {
                Ok(res) if !res.dropped_tokens.is_empty() => {
                    run.warn(format!("weat {}/{}: dropped {}", r.space, r.bucket, res.dropped_summary()))
                }
                Err(e) => run.warn(format!("weat {}/{} failed: {e}", r.space, r.bucket)),
                _ => {}
            }
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["space", "bucket", "effect_size", "dropped"]).map_err(stage_err("weat"))?;
    let mut body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8");
    for b in &batches {
        let mut buf = Vec::new();
        b.batch.write_csv(&mut buf).map_err(stage_err("weat"))?;
        let text = String::from_utf8(buf).expect("csv is utf-8");
        body.extend(text.lines().skip(1).map(|l| format!("{l}\n")));
    }
    run.text("weat", "weat.csv", &body)?;
    let json = serde_json::to_string_pretty(&batches).map_err(stage_err("weat"))?;
    run.text("weat", "weat.json", &json)?;
    Ok(())
}

/// Runs every stage. Files from stages that finished before a failure are
/// kept, and `run_report.json` is written either way.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let out = config.output_path()?;
    let _lock = OutputLock::acquire(&out)?;
    let mut run = Run {
        config,
        out,
        report: RunReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed: config.sgns.seed,
            outputs: Vec::new(),
            stage_times: Vec::new(),
            warnings: Vec::new(),
            failed_stage: None,
            error: None,
        },
    };
    let result = run_stages(&mut run);
    run.record(REPORT_FILE);
    run.write_report()?;
    result.map(|()| run.report)
}

fn run_stages(run: &mut Run) -> Result<(), PipelineError> {
    let inputs = run.timed("load", load_inputs)?;
    let corpus = run.timed("ingest", stage_ingest)?;
    run.timed("metrics", |r| stage_metrics(r, &corpus, &inputs))?;
    let spaces = run.timed("train", |r| stage_train(r, &corpus))?;
    let aligned = run.timed("align", |r| stage_align(r, &spaces))?;
    run.timed("neighbors", |r| stage_neighbors(r, &aligned, &inputs.lexicon))?;
    run.timed("weat", |r| stage_weat(r, &corpus, &spaces))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig::from_toml("manifest = \"m.csv\"\noutput_dir = \"out\"\n", Path::new("/nonexistent")).unwrap()
    }

    #[test]
    fn missing_manifest_is_named() {
        let c = RunConfig::from_toml("output_dir = \"out\"\n", Path::new(".")).unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("manifest"), "{e}");
        assert_eq!(PipelineError::from(e).exit_code(), 2);
        let e = base().validate().unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { field: "manifest", .. }));
    }

    #[test]
    fn weat_section() {
        let c = RunConfig::from_toml(
            "[weat]\nbuiltin = \"gender-occupations\"\noov_policy = \"error\"\n[[weat.partitions]]\nlabel = \"b\"\nindustry = \"bollywood\"\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.weat.options().oov_policy, OovPolicy::Error);
        assert_eq!(c.weat.partitions[0].industry, Some(Industry::Bollywood));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_toml("manifest = \"m\"\nbogus = 1\n", Path::new(".")).is_err());
    }

    #[test]
    fn hash_tracks_meaningful_fields() {
        let a = base();
        let mut b = base();
        assert_eq!(a.hash(), b.hash());
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.sgns.seed += 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = base();
        c.query_tokens.push("dowry".into());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn defaults() {
        let c = base();
        assert_eq!(c.buckets, BucketRanges::default());
        assert_eq!(c.anchors, DEFAULT_ANCHORS);
        assert_eq!(c.neighbors, 10);
        assert_eq!(c.mention_granularity, MentionGranularity::Film);
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let first = OutputLock::acquire(dir.path()).unwrap();
        assert!(matches!(OutputLock::acquire(dir.path()), Err(PipelineError::Locked(_))));
        drop(first);
        assert!(OutputLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn token_file_names() {
        assert_eq!(file_stem_for("it's"), "it_s");
        assert_eq!(file_stem_for("dowry"), "dowry");
    }

    #[test]
    fn amounts_with_mean_row() {
        let rows = amount_rows(&["give me 5 lakh".into(), "nothing".into(), "10 lakh now".into()], &UnitTable::default());
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].first_amount, None);
        assert_eq!(rows[3].sample, "mean");
        assert_eq!(rows[3].first_amount, Some(750_000.0));
    }
}
