//! Subtitle ingestion, tokenization and era bucketing.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

/// Honorifics whose trailing period is kept as part of the token.
pub const HONORIFICS: [&str; 3] = ["dr", "mr", "mrs"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed timestamp at line {line}: {text:?}")]
    MalformedTimestamp { line: usize, text: String },
    #[error("malformed cue index at line {line}: {text:?}")]
    MalformedIndex { line: usize, text: String },
    #[error("cue ends before it starts at line {line}")]
    InvertedCue { line: usize },
    #[error("invalid UTF-8 after byte {valid_up_to}")]
    EncodingError { valid_up_to: usize },
    #[error("bucket ranges {first} and {second} overlap")]
    OverlappingRanges { first: String, second: String },
    #[error("bucket {name} has start {start} after end {end}")]
    InvalidRange { name: String, start: i32, end: i32 },
    #[error("duplicate bucket name {0}")]
    DuplicateBucket(String),
    #[error("year {year} of film {film_id} outside [{MIN_YEAR}, {MAX_YEAR}]")]
    YearOutOfRange { film_id: String, year: i32 },
    #[error("duplicate film id {0}")]
    DuplicateFilmId(String),
    #[error("unknown industry {0:?}")]
    UnknownIndustry(String),
    #[error("unsupported subtitle format for {0}")]
    UnsupportedFormat(PathBuf),
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] csv::Error),
    #[error("corpus json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CorpusError {
    fn in_file(self, path: &Path) -> Self {
        CorpusError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// One subtitle cue with markup already stripped from its text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub index: u32,
    pub start_ms: u64,
    pub end_ms: u64,
    pub text: String,
}

fn timestamp_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*(\d+):(\d{2}):(\d{2}),(\d{3})\s*-->\s*(\d+):(\d{2}):(\d{2}),(\d{3})(?:\s.*)?$",
        )
        .unwrap()
    })
}

fn markup_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // html-like tags, ASS override blocks, bracketed sound annotations
    RE.get_or_init(|| Regex::new(r"<[^>]*>|\{[^}]*\}|\[[^\]]*\]").unwrap())
}

fn parse_time(caps: &regex::Captures<'_>, base: usize) -> Option<u64> {
    let field = |i: usize| caps.get(base + i)?.as_str().parse::<u64>().ok();
    let (h, m, s, ms) = (field(0)?, field(1)?, field(2)?, field(3)?);
    if m >= 60 || s >= 60 {
        return None;
    }
    Some(((h * 60 + m) * 60 + s) * 1000 + ms)
}

fn parse_time_line(line: &str, line_no: usize) -> Result<(u64, u64)> {
    let malformed = || CorpusError::MalformedTimestamp {
        line: line_no,
        text: line.to_string(),
    };
    let caps = timestamp_re().captures(line).ok_or_else(malformed)?;
    let start = parse_time(&caps, 1).ok_or_else(malformed)?;
    let end = parse_time(&caps, 5).ok_or_else(malformed)?;
    if start > end {
        return Err(CorpusError::InvertedCue { line: line_no });
    }
    Ok((start, end))
}

/// Removes subtitle markup and normalizes whitespace. Lines left empty are
/// dropped and the rest are joined with `\n`.
pub fn strip_markup(text: &str) -> String {
    let mut lines = Vec::new();
    for line in text.lines() {
        let stripped = markup_re().replace_all(line, " ");
        let collapsed = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
        if !collapsed.is_empty() {
            lines.push(collapsed);
        }
    }
    lines.join("\n")
}

fn decode(raw: &[u8]) -> Result<&str> {
    let raw = raw.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(raw);
    std::str::from_utf8(raw).map_err(|e| CorpusError::EncodingError {
        valid_up_to: e.valid_up_to(),
    })
}

/// Parses SubRip text into cues in file order. Cues whose text is empty
/// after markup stripping are dropped.
pub fn parse_srt(raw: &[u8]) -> Result<Vec<Cue>> {
    let text = decode(raw)?;
    let lines: Vec<&str> = text.lines().collect();
    let mut cues = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let index_line = lines[i].trim();
        let index: u32 = match index_line.parse() {
            Ok(n) if n >= 1 => n,
            _ => {
                return Err(CorpusError::MalformedIndex {
                    line: i + 1,
                    text: index_line.to_string(),
                })
            }
        };
        i += 1;
        let time_line = lines.get(i).copied().unwrap_or("");
        let (start_ms, end_ms) = parse_time_line(time_line, i + 1)?;
        i += 1;
        let body_start = i;
        while i < lines.len() && !lines[i].trim().is_empty() {
            i += 1;
        }
        let text = strip_markup(&lines[body_start..i].join("\n"));
        if !text.is_empty() {
            cues.push(Cue {
                index,
                start_ms,
                end_ms,
                text,
            });
        }
    }
    Ok(cues)
}

pub fn format_timestamp(ms: u64) -> String {
    let (h, rest) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rest) = (rest / 60_000, rest % 60_000);
    let (s, ms) = (rest / 1000, rest % 1000);
    format!("{h:02}:{m:02}:{s:02},{ms:03}")
}

pub fn serialize_srt(cues: &[Cue]) -> String {
    let mut out = String::new();
    for cue in cues {
        out.push_str(&format!(
            "{}\n{} --> {}\n{}\n\n",
            cue.index,
            format_timestamp(cue.start_ms),
            format_timestamp(cue.end_ms),
            cue.text
        ));
    }
    out
}

/// Extension point for subtitle formats other than SubRip.
pub trait SubtitleFormat: Sync {
    fn parse(&self, raw: &[u8]) -> Result<Vec<Cue>>;
}

pub struct Srt;

impl SubtitleFormat for Srt {
    fn parse(&self, raw: &[u8]) -> Result<Vec<Cue>> {
        parse_srt(raw)
    }
}

fn format_for(path: &Path) -> Option<&'static dyn SubtitleFormat> {
    match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
        "srt" => Some(&Srt),
        _ => None,
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// Lowercased word tokens of `text`.
///
/// Splits on whitespace and punctuation. Apostrophes between word characters
/// are kept (`it's`), and a period directly after one of [`HONORIFICS`]
/// stays attached (`dr.`).
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text
        .nfc()
        .collect::<String>()
        .to_lowercase()
        .replace('\u{2019}', "'");
    let chars: Vec<char> = normalized.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if is_word_char(c) {
            current.push(c);
            continue;
        }
        let next_is_word = chars.get(i + 1).is_some_and(|&n| is_word_char(n));
        if c == '\'' && !current.is_empty() && next_is_word {
            current.push(c);
            continue;
        }
        if c == '.' && HONORIFICS.contains(&current.as_str()) {
            current.push('.');
        }
        if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens.into_iter().map(|t| t.nfc().collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Industry {
    Bollywood,
    Hollywood,
    World,
}

impl FromStr for Industry {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bollywood" => Ok(Industry::Bollywood),
            "hollywood" => Ok(Industry::Hollywood),
            "world" => Ok(Industry::World),
            _ => Err(CorpusError::UnknownIndustry(s.to_string())),
        }
    }
}

impl fmt::Display for Industry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Industry::Bollywood => "bollywood",
            Industry::Hollywood => "hollywood",
            Industry::World => "world",
        })
    }
}

/// A film's subtitles together with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtitleDocument {
    pub film_id: String,
    pub year: i32,
    pub industry: Industry,
    pub genre_tags: BTreeSet<String>,
    pub cues: Vec<Cue>,
    pub tokens: Vec<String>,
}

impl SubtitleDocument {
    pub fn new(
        film_id: impl Into<String>,
        year: i32,
        industry: Industry,
        genre_tags: BTreeSet<String>,
        cues: Vec<Cue>,
    ) -> Result<Self> {
        let film_id = film_id.into();
        if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
            return Err(CorpusError::YearOutOfRange { film_id, year });
        }
        let tokens = cues.iter().flat_map(|c| tokenize(&c.text)).collect();
        Ok(SubtitleDocument {
            film_id,
            year,
            industry,
            genre_tags,
            cues,
            tokens,
        })
    }

    /// Builds a document from bare dialogue lines, numbering cues from 1
    /// with one-second timings. Mostly useful for tests and examples.
    pub fn from_lines(
        film_id: impl Into<String>,
        year: i32,
        industry: Industry,
        lines: &[&str],
    ) -> Result<Self> {
        let cues = lines
            .iter()
            .enumerate()
            .map(|(i, text)| Cue {
                index: i as u32 + 1,
                start_ms: i as u64 * 1000,
                end_ms: i as u64 * 1000 + 900,
                text: strip_markup(text),
            })
            .filter(|c| !c.text.is_empty())
            .collect();
        Self::new(film_id, year, industry, BTreeSet::new(), cues)
    }

    /// Tokens grouped by cue; each cue is one sentence.
    pub fn sentences(&self) -> Vec<Vec<String>> {
        self.cues.iter().map(|c| tokenize(&c.text)).collect()
    }

    pub fn has_genre(&self, genre: &str) -> bool {
        self.genre_tags.contains(&genre.to_lowercase())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketRange {
    pub name: String,
    pub start: i32,
    pub end: i32,
}

impl BucketRange {
    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

/// Disjoint, inclusive year ranges kept in chronological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<String, [i32; 2]>",
    into = "BTreeMap<String, [i32; 2]>"
)]
pub struct BucketRanges {
    ranges: Vec<BucketRange>,
}

impl BucketRanges {
    pub fn new(ranges: impl IntoIterator<Item = (String, i32, i32)>) -> Result<Self> {
        let mut ranges: Vec<BucketRange> = ranges
            .into_iter()
            .map(|(name, start, end)| BucketRange { name, start, end })
            .collect();
        let mut seen = HashSet::new();
        for r in &ranges {
            if r.start > r.end {
                return Err(CorpusError::InvalidRange {
                    name: r.name.clone(),
                    start: r.start,
                    end: r.end,
                });
            }
            if !seen.insert(r.name.clone()) {
                return Err(CorpusError::DuplicateBucket(r.name.clone()));
            }
        }
        ranges.sort_by(|a, b| (a.start, &a.name).cmp(&(b.start, &b.name)));
        for pair in ranges.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(CorpusError::OverlappingRanges {
                    first: pair[0].name.clone(),
                    second: pair[1].name.clone(),
                });
            }
        }
        Ok(BucketRanges { ranges })
    }

    pub fn bucket_for(&self, year: i32) -> Option<&str> {
        self.ranges
            .iter()
            .find(|r| r.contains(year))
            .map(|r| r.name.as_str())
    }

    /// Bucket names from oldest to newest.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ranges.iter().map(|r| r.name.as_str())
    }

    pub fn ranges(&self) -> &[BucketRange] {
        &self.ranges
    }

    pub fn get(&self, name: &str) -> Option<&BucketRange> {
        self.ranges.iter().find(|r| r.name == name)
    }
}

impl Default for BucketRanges {
    /// old = 1950 to 1969, mid = 1970 to 1999, new = 2000 to 2020.
    fn default() -> Self {
        BucketRanges::new([
            ("old".to_string(), 1950, 1969),
            ("mid".to_string(), 1970, 1999),
            ("new".to_string(), 2000, 2020),
        ])
        .expect("default ranges are disjoint")
    }
}

impl TryFrom<BTreeMap<String, [i32; 2]>> for BucketRanges {
    type Error = CorpusError;

    fn try_from(map: BTreeMap<String, [i32; 2]>) -> Result<Self> {
        BucketRanges::new(map.into_iter().map(|(k, [s, e])| (k, s, e)))
    }
}

impl From<BucketRanges> for BTreeMap<String, [i32; 2]> {
    fn from(r: BucketRanges) -> Self {
        r.ranges
            .into_iter()
            .map(|b| (b.name, [b.start, b.end]))
            .collect()
    }
}

/// Documents grouped into named eras. Documents outside every range are
/// kept in `unassigned` rather than dropped.
#[derive(Debug, Clone)]
pub struct TimeBucketedCorpus {
    ranges: BucketRanges,
    buckets: BTreeMap<String, Vec<SubtitleDocument>>,
    unassigned: Vec<SubtitleDocument>,
}

impl TimeBucketedCorpus {
    pub fn ranges(&self) -> &BucketRanges {
        &self.ranges
    }

    pub fn bucket(&self, name: &str) -> &[SubtitleDocument] {
        self.buckets.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `(name, documents)` from oldest to newest bucket.
    pub fn buckets(&self) -> impl Iterator<Item = (&str, &[SubtitleDocument])> {
        self.ranges.names().map(move |n| (n, self.bucket(n)))
    }

    pub fn unassigned(&self) -> &[SubtitleDocument] {
        &self.unassigned
    }

    pub fn assigned_len(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    /// Keeps only documents matching `keep`, in every bucket and in the
    /// unassigned list.
    pub fn filter(&self, keep: impl Fn(&SubtitleDocument) -> bool) -> TimeBucketedCorpus {
        TimeBucketedCorpus {
            ranges: self.ranges.clone(),
            buckets: self
                .buckets
                .iter()
                .map(|(k, docs)| (k.clone(), docs.iter().filter(|d| keep(d)).cloned().collect()))
                .collect(),
            unassigned: self.unassigned.iter().filter(|d| keep(d)).cloned().collect(),
        }
    }
}

/// Assigns each document to the bucket containing its year.
pub fn bucketize(
    documents: Vec<SubtitleDocument>,
    ranges: &BucketRanges,
) -> Result<TimeBucketedCorpus> {
    let mut seen = HashSet::new();
    let mut buckets: BTreeMap<String, Vec<SubtitleDocument>> = ranges
        .names()
        .map(|n| (n.to_string(), Vec::new()))
        .collect();
    let mut unassigned = Vec::new();
    for doc in documents {
        if !seen.insert(doc.film_id.clone()) {
            return Err(CorpusError::DuplicateFilmId(doc.film_id));
        }
        match ranges.bucket_for(doc.year) {
            Some(name) => buckets.get_mut(name).unwrap().push(doc),
            None => unassigned.push(doc),
        }
    }
    Ok(TimeBucketedCorpus {
        ranges: ranges.clone(),
        buckets,
        unassigned,
    })
}

/// Token counts. A token that is absent has count zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, token: &str, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(token.to_string()).or_insert(0) += n;
        self.total += n;
    }

    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn merge(&mut self, other: &FrequencyTable) {
        for (k, v) in other.iter() {
            self.add(k, v);
        }
    }

    /// Entries sorted by count descending, then token ascending.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

impl<S: AsRef<str>> FromIterator<S> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut t = FrequencyTable::new();
        for tok in iter {
            t.add(tok.as_ref(), 1);
        }
        t
    }
}

pub fn count_tokens<'a>(documents: impl IntoIterator<Item = &'a SubtitleDocument>) -> FrequencyTable {
    documents
        .into_iter()
        .flat_map(|d| d.tokens.iter())
        .collect()
}

/// One row of a corpus manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub film_id: String,
    pub year: i32,
    pub industry: Industry,
    pub genre_tags: BTreeSet<String>,
    pub path: PathBuf,
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    film_id: String,
    year: i32,
    industry: String,
    genre_tags: String,
    path: String,
}

/// Reads a `film_id,year,industry,genre_tags,path` manifest. Relative
/// subtitle paths are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut entries = Vec::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row?;
        let genre_tags = row
            .genre_tags
            .split(';')
            .map(|g| g.trim().to_lowercase())
            .filter(|g| !g.is_empty())
            .collect();
        entries.push(ManifestEntry {
            film_id: row.film_id,
            year: row.year,
            industry: row.industry.parse()?,
            genre_tags,
            path: base.join(row.path),
        });
    }
    Ok(entries)
}

/// Loads and tokenizes every subtitle file named in the manifest. Files are
/// parsed in parallel; output order follows the manifest.
pub fn ingest(entries: &[ManifestEntry]) -> Result<Vec<SubtitleDocument>> {
    entries
        .par_iter()
        .map(|e| {
            let format =
                format_for(&e.path).ok_or_else(|| CorpusError::UnsupportedFormat(e.path.clone()))?;
            let raw = fs::read(&e.path).map_err(|err| CorpusError::io(&e.path, err))?;
            let cues = format.parse(&raw).map_err(|err| err.in_file(&e.path))?;
            SubtitleDocument::new(
                e.film_id.clone(),
                e.year,
                e.industry,
                e.genre_tags.clone(),
                cues,
            )
        })
        .collect()
}

const RANGES_FILE: &str = "ranges.json";
const UNASSIGNED_FILE: &str = "unassigned.jsonl";

fn write_jsonl(path: &Path, docs: &[SubtitleDocument]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in docs {
        serde_json::to_writer(&mut w, doc)?;
        w.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

fn read_jsonl(path: &Path) -> Result<Vec<SubtitleDocument>> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut docs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(serde_json::from_str(&line)?);
    }
    Ok(docs)
}

/// Writes the corpus as `ranges.json`, one `<bucket>.jsonl` per bucket and
/// `unassigned.jsonl`, one document per line.
pub fn save_corpus(corpus: &TimeBucketedCorpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    let ranges_path = dir.join(RANGES_FILE);
    let json = serde_json::to_string_pretty(corpus.ranges())?;
    fs::write(&ranges_path, json).map_err(|e| CorpusError::io(&ranges_path, e))?;
    for (name, docs) in corpus.buckets() {
        write_jsonl(&dir.join(format!("{name}.jsonl")), docs)?;
    }
    write_jsonl(&dir.join(UNASSIGNED_FILE), corpus.unassigned())
}

pub fn load_corpus(dir: &Path) -> Result<TimeBucketedCorpus> {
    let ranges_path = dir.join(RANGES_FILE);
    let text = fs::read_to_string(&ranges_path).map_err(|e| CorpusError::io(&ranges_path, e))?;
    let ranges: BucketRanges = serde_json::from_str(&text)?;
    let mut docs = Vec::new();
    for name in ranges.names() {
        let p = dir.join(format!("{name}.jsonl"));
        if p.exists() {
            docs.extend(read_jsonl(&p)?);
        }
    }
    let p = dir.join(UNASSIGNED_FILE);
    if p.exists() {
        docs.extend(read_jsonl(&p)?);
    }
    for d in &docs {
        if !(MIN_YEAR..=MAX_YEAR).contains(&d.year) {
            return Err(CorpusError::YearOutOfRange {
                film_id: d.film_id.clone(),
                year: d.year,
            });
        }
    }
    bucketize(docs, &ranges)
}
