//! Count- and template-based analyses.
//!
//! Everything here is a pure function of its inputs.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, FrequencyTable, SubtitleDocument, TimeBucketedCorpus};
use crate::lexicon::{Gazetteer, Religion, ReligionMap, ValenceLexicon};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no gendered pronouns to form a ratio")]
    EmptyDenominator,
    #[error("no childbirth record is labeled boy or girl")]
    NoLabeledRecords,
    #[error("no surname has a religion label")]
    NoMappedSurnames,
    #[error("none of the tokens is in the lexicon")]
    AllTokensOutOfLexicon,
    #[error("label lists differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("label lists are empty")]
    EmptyLabels,
    #[error("expected agreement is 1; kappa is undefined")]
    DegenerateAgreement,
    #[error("unknown birth label {0:?}")]
    UnknownBirthLabel(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// `100 * part / (part + other)`. The minority side is divided directly and
/// the majority side is its complement, so the two shares sum to exactly 100.
fn share_percent(part: u64, other: u64) -> f64 {
    let total = (part + other) as f64;
    if part <= other {
        (100 * part) as f64 / total
    } else {
        100.0 - (100 * other) as f64 / total
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronounCounts {
    pub he: u64,
    pub him: u64,
    pub she: u64,
    pub her: u64,
}

impl PronounCounts {
    pub fn new(he: u64, him: u64, she: u64, her: u64) -> Self {
        PronounCounts { he, him, she, her }
    }

    pub fn from_table(table: &FrequencyTable) -> Self {
        PronounCounts {
            he: table.get("he"),
            him: table.get("him"),
            she: table.get("she"),
            her: table.get("her"),
        }
    }

    pub fn male(&self) -> u64 {
        self.he + self.him
    }

    pub fn female(&self) -> u64 {
        self.she + self.her
    }
}

/// Male pronoun ratio: share of `he`/`him` among `he`/`him`/`she`/`her`, in percent.
pub fn compute_mpr(counts: &PronounCounts) -> Result<f64> {
    if counts.male() + counts.female() == 0 {
        return Err(MetricsError::EmptyDenominator);
    }
    Ok(share_percent(counts.male(), counts.female()))
}

/// Female counterpart of [`compute_mpr`]; the two always sum to exactly 100.
pub fn compute_fpr(counts: &PronounCounts) -> Result<f64> {
    if counts.male() + counts.female() == 0 {
        return Err(MetricsError::EmptyDenominator);
    }
    Ok(share_percent(counts.female(), counts.male()))
}

pub const CHILDBIRTH_KEYWORDS: [&str; 5] = ["birth", "baby", "pregnant", "pregnancy", "congratulations"];
pub const BOY_PHRASE: &str = "it's a boy";
pub const GIRL_PHRASE: &str = "it's a girl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BirthLabel {
    Boy,
    Girl,
    Unlabeled,
}

impl FromStr for BirthLabel {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "boy" => Ok(BirthLabel::Boy),
            "girl" => Ok(BirthLabel::Girl),
            "unlabeled" | "" => Ok(BirthLabel::Unlabeled),
            other => Err(MetricsError::UnknownBirthLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BirthRecord {
    pub dialogue: String,
    pub film_id: String,
    pub cue_index: u32,
    pub bucket: String,
    pub gender_label: BirthLabel,
}

/// Decides whether a cue talks about childbirth and, if an explicit
/// announcement phrase is present, which gender it announces.
///
/// Phrases are matched on token boundaries of the normalized text. A cue
/// containing both phrases is left unlabeled.
pub fn classify_birth_dialogue(text: &str) -> Option<BirthLabel> {
    let tokens = tokenize(text);
    let padded = format!(" {} ", tokens.join(" "));
    let boy = padded.contains(&format!(" {BOY_PHRASE} "));
    let girl = padded.contains(&format!(" {GIRL_PHRASE} "));
    match (boy, girl) {
        (true, false) => Some(BirthLabel::Boy),
        (false, true) => Some(BirthLabel::Girl),
        (true, true) => Some(BirthLabel::Unlabeled),
        (false, false) => tokens
            .iter()
            .any(|t| CHILDBIRTH_KEYWORDS.contains(&t.as_str()))
            .then_some(BirthLabel::Unlabeled),
    }
}

pub fn childbirth_candidates_in(bucket: &str, documents: &[SubtitleDocument]) -> Vec<BirthRecord> {
    let mut out = Vec::new();
    for doc in documents {
        for cue in &doc.cues {
            if let Some(label) = classify_birth_dialogue(&cue.text) {
                out.push(BirthRecord {
                    dialogue: cue.text.clone(),
                    film_id: doc.film_id.clone(),
                    cue_index: cue.index,
                    bucket: bucket.to_string(),
                    gender_label: label,
                });
            }
        }
    }
    out
}

/// Every childbirth-related cue in the bucketed part of the corpus, oldest
/// bucket first.
pub fn extract_childbirth_candidates(corpus: &TimeBucketedCorpus) -> Vec<BirthRecord> {
    corpus
        .buckets()
        .flat_map(|(name, docs)| childbirth_candidates_in(name, docs))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct BirthAnnotation {
    pub film_id: String,
    pub cue_index: u32,
    pub gender: String,
}

/// Reads a `film_id,cue_index,gender` annotation file.
pub fn read_birth_annotations(reader: impl Read) -> Result<HashMap<(String, u32), BirthLabel>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = HashMap::new();
    for row in rdr.deserialize::<BirthAnnotation>() {
        let row = row?;
        out.insert((row.film_id, row.cue_index), row.gender.parse()?);
    }
    Ok(out)
}

/// Overrides record labels with annotations keyed by `(film_id, cue_index)`.
/// Returns how many records were updated.
pub fn apply_birth_annotations(
    records: &mut [BirthRecord],
    annotations: &HashMap<(String, u32), BirthLabel>,
) -> usize {
    let mut applied = 0;
    for r in records.iter_mut() {
        if let Some(&label) = annotations.get(&(r.film_id.clone(), r.cue_index)) {
            r.gender_label = label;
            applied += 1;
        }
    }
    applied
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BirthCounts {
    pub boy: u64,
    pub girl: u64,
    pub unlabeled: u64,
}

pub fn count_births<'a>(records: impl IntoIterator<Item = &'a BirthRecord>) -> BirthCounts {
    let mut c = BirthCounts::default();
    for r in records {
        match r.gender_label {
            BirthLabel::Boy => c.boy += 1,
            BirthLabel::Girl => c.girl += 1,
            BirthLabel::Unlabeled => c.unlabeled += 1,
        }
    }
    c
}

/// Male birth ratio in percent. Unlabeled records are ignored.
pub fn compute_mbr(records: &[BirthRecord]) -> Result<f64> {
    let c = count_births(records);
    if c.boy + c.girl == 0 {
        return Err(MetricsError::NoLabeledRecords);
    }
    Ok(share_percent(c.boy, c.girl))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionGranularity {
    /// A film counts once per place no matter how often it names it.
    #[default]
    Film,
    /// Every occurrence counts.
    Token,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketMentions {
    pub bucket: String,
    pub documents: usize,
    /// Places with a nonzero count only.
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MentionReport {
    pub granularity: MentionGranularity,
    pub buckets: Vec<BucketMentions>,
    pub zero_mention_places: Vec<String>,
}

impl MentionReport {
    pub fn count(&self, bucket: &str, place: &str) -> u64 {
        self.buckets
            .iter()
            .find(|b| b.bucket == bucket)
            .and_then(|b| b.counts.get(place).copied())
            .unwrap_or(0)
    }
}

/// Alias lookup keyed by first token, longest alias first.
struct AliasIndex<'a> {
    by_first: HashMap<&'a str, Vec<(&'a [String], &'a str)>>,
}

impl<'a> AliasIndex<'a> {
    fn new(gazetteer: &'a Gazetteer) -> Self {
        let mut by_first: HashMap<&str, Vec<(&[String], &str)>> = HashMap::new();
        for (name, place) in gazetteer.entries() {
            for alias in &place.aliases {
                by_first
                    .entry(alias[0].as_str())
                    .or_default()
                    .push((alias.as_slice(), name));
            }
        }
        for v in by_first.values_mut() {
            v.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(b.1)));
        }
        AliasIndex { by_first }
    }

    /// Places mentioned in one sentence, one entry per occurrence. Matching
    /// is greedy left to right, so "new delhi" is not also counted as "delhi".
    fn scan(&self, tokens: &[String], out: &mut Vec<&'a str>) {
        let mut i = 0;
        while i < tokens.len() {
            let hit = self.by_first.get(tokens[i].as_str()).and_then(|cands| {
                cands
                    .iter()
                    .find(|(alias, _)| tokens[i..].starts_with(alias))
            });
            match hit {
                Some((alias, name)) => {
                    out.push(name);
                    i += alias.len();
                }
                None => i += 1,
            }
        }
    }
}

pub fn count_mentions_in(
    documents: &[SubtitleDocument],
    gazetteer: &Gazetteer,
    granularity: MentionGranularity,
) -> BTreeMap<String, u64> {
    let index = AliasIndex::new(gazetteer);
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for doc in documents {
        let mut hits = Vec::new();
        for sentence in doc.sentences() {
            index.scan(&sentence, &mut hits);
        }
        if granularity == MentionGranularity::Film {
            hits.sort_unstable();
            hits.dedup();
        }
        for name in hits {
            *counts.entry(name.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

/// Per-bucket place mention counts with aliases pooled under their
/// canonical name.
pub fn count_mentions(
    corpus: &TimeBucketedCorpus,
    gazetteer: &Gazetteer,
    granularity: MentionGranularity,
) -> MentionReport {
    let buckets: Vec<BucketMentions> = corpus
        .buckets()
        .map(|(name, docs)| BucketMentions {
            bucket: name.to_string(),
            documents: docs.len(),
            counts: count_mentions_in(docs, gazetteer, granularity),
        })
        .collect();
    let zero_mention_places = gazetteer
        .entries()
        .map(|(name, _)| name)
        .filter(|name| buckets.iter().all(|b| !b.counts.contains_key(*name)))
        .map(str::to_string)
        .collect();
    MentionReport {
        granularity,
        buckets,
        zero_mention_places,
    }
}

const SURNAME_HONORIFICS: [&str; 6] = ["mr.", "mrs.", "dr.", "mr", "mrs", "dr"];
const DOCTOR_HONORIFICS: [&str; 3] = ["dr.", "dr", "doctor"];

/// Words that may follow an honorific but are never surnames.
pub const SURNAME_STOPWORDS: &[&str] = &[
    "a", "about", "am", "an", "and", "are", "as", "at", "be", "but", "by", "can", "come", "could",
    "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "here", "him", "his",
    "how", "i", "if", "in", "is", "it", "it's", "just", "me", "my", "no", "not", "now", "of",
    "on", "or", "please", "said", "says", "she", "should", "so", "that", "the", "then", "there",
    "they", "this", "to", "told", "too", "was", "we", "were", "what", "when", "where", "who",
    "will", "with", "would", "yes", "you", "your", "sir", "madam", "sahib", "saab", "ji", "sahab",
    "doctor", "dr.", "mr.", "mrs.", "dr", "mr", "mrs", "call", "tell", "ask", "get", "go", "see",
    "sit", "give", "take", "let", "bring",
];

fn capitalize(token: &str) -> String {
    let mut chars = token.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Surname following an honorific at `tokens[i]`, if any.
fn surname_after(tokens: &[String], i: usize, doctor_only: bool) -> Option<String> {
    let cue = tokens[i].as_str();
    let triggers = if doctor_only || cue == "doctor" {
        &DOCTOR_HONORIFICS[..]
    } else {
        &SURNAME_HONORIFICS[..]
    };
    if !triggers.contains(&cue) {
        return None;
    }
    let next = tokens.get(i + 1)?;
    let next = next.strip_suffix("'s").unwrap_or(next);
    let plausible = next.chars().count() >= 2
        && next.starts_with(char::is_alphabetic)
        && next.chars().all(|c| c.is_alphabetic() || c == '\'')
        && !SURNAME_STOPWORDS.contains(&next);
    plausible.then(|| capitalize(next))
}

/// Surnames introduced by `mr.`, `mrs.`, `dr.` or `doctor`, capitalized.
/// With `doctor_only`, only the `dr.` and `doctor` patterns are used.
pub fn surnames_in(documents: &[SubtitleDocument], doctor_only: bool) -> FrequencyTable {
    let mut table = FrequencyTable::new();
    for doc in documents {
        for sentence in doc.sentences() {
            for i in 0..sentence.len() {
                if let Some(s) = surname_after(&sentence, i, doctor_only) {
                    table.add(&s, 1);
                }
            }
        }
    }
    table
}

/// Surnames across every bucket of the corpus.
pub fn extract_surnames(corpus: &TimeBucketedCorpus, doctor_only: bool) -> FrequencyTable {
    let mut table = FrequencyTable::new();
    for (_, docs) in corpus.buckets() {
        table.merge(&surnames_in(docs, doctor_only));
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReligionDistribution {
    /// Percent of mapped surname occurrences per label. Sums to 100.
    pub percentages: BTreeMap<Religion, f64>,
    pub mapped_occurrences: u64,
    pub unmapped_occurrences: u64,
    /// Share of surname occurrences that had a label, in [0, 1].
    pub coverage: f64,
    pub unmapped_surnames: Vec<String>,
}

pub fn religion_distribution(surnames: &FrequencyTable, map: &ReligionMap) -> Result<ReligionDistribution> {
    let mut per_label: BTreeMap<Religion, u64> = BTreeMap::new();
    let (mut mapped, mut unmapped) = (0u64, 0u64);
    let mut unmapped_surnames = Vec::new();
    for (surname, n) in surnames.iter() {
        match map.get(surname) {
            Some(label) => {
                *per_label.entry(label).or_insert(0) += n;
                mapped += n;
            }
            None => {
                unmapped += n;
                unmapped_surnames.push(surname.to_string());
            }
        }
    }
    if mapped == 0 {
        return Err(MetricsError::NoMappedSurnames);
    }
    let percentages = per_label
        .into_iter()
        .map(|(label, n)| (label, 100.0 * n as f64 / mapped as f64))
        .collect();
    Ok(ReligionDistribution {
        percentages,
        mapped_occurrences: mapped,
        unmapped_occurrences: unmapped,
        coverage: mapped as f64 / (mapped + unmapped) as f64,
        unmapped_surnames,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValenceScore {
    pub mean: f64,
    pub matched: usize,
    /// Tokens absent from the lexicon, in input order.
    pub skipped: Vec<String>,
}

/// Mean lexicon valence over the tokens found in the lexicon.
pub fn score_valence<S: AsRef<str>>(tokens: &[S], lexicon: &ValenceLexicon) -> Result<ValenceScore> {
    let mut sum = 0.0;
    let mut matched = 0usize;
    let mut skipped = Vec::new();
    for t in tokens {
        let key = t.as_ref().to_lowercase();
        match lexicon.get(&key) {
            Some(v) => {
                sum += v;
                matched += 1;
            }
            None => skipped.push(t.as_ref().to_string()),
        }
    }
    if matched == 0 {
        return Err(MetricsError::AllTokensOutOfLexicon);
    }
    Ok(ValenceScore {
        mean: sum / matched as f64,
        matched,
        skipped,
    })
}

/// Cohen's kappa for two raters over nominal labels.
///
/// Evaluated as `(n·agree − Σ_k a_k b_k) / (n² − Σ_k a_k b_k)` in integers,
/// which is the usual `(p_o − p_e) / (1 − p_e)` with a single rounding.
pub fn cohen_kappa<T: Ord>(labels_a: &[T], labels_b: &[T]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(MetricsError::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(MetricsError::EmptyLabels);
    }
    let n = labels_a.len() as i128;
    let mut marginals: BTreeMap<&T, (i128, i128)> = BTreeMap::new();
    let mut agree = 0i128;
    for (a, b) in labels_a.iter().zip(labels_b) {
        marginals.entry(a).or_default().0 += 1;
        marginals.entry(b).or_default().1 += 1;
        if a == b {
            agree += 1;
        }
    }
    let chance: i128 = marginals.values().map(|(a, b)| a * b).sum();
    let denom = n * n - chance;
    if denom == 0 {
        return Err(MetricsError::DegenerateAgreement);
    }
    Ok((n * agree - chance) as f64 / denom as f64)
}

/// Number-word multipliers recognized by [`extract_monetary_amounts_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitTable {
    pub units: BTreeMap<String, f64>,
}

impl Default for UnitTable {
    fn default() -> Self {
        let units = [
            ("thousand", 1e3),
            ("thousands", 1e3),
            ("lakh", 1e5),
            ("lakhs", 1e5),
            ("lac", 1e5),
            ("lacs", 1e5),
            ("million", 1e6),
            ("millions", 1e6),
            ("crore", 1e7),
            ("crores", 1e7),
            ("billion", 1e9),
            ("billions", 1e9),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        UnitTable { units }
    }
}

const SMALL_NUMBERS: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];
const TENS: [&str; 8] = [
    "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

fn word_value(word: &str) -> Option<f64> {
    if let Some(i) = SMALL_NUMBERS.iter().position(|w| *w == word) {
        return Some(i as f64);
    }
    TENS.iter()
        .position(|w| *w == word)
        .map(|i| (i as f64 + 2.0) * 10.0)
}

fn amount_token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+(?:,\d+)*(?:\.\d+)?|[a-z]+").unwrap())
}

pub fn extract_monetary_amounts(text: &str) -> Vec<f64> {
    extract_monetary_amounts_with(text, &UnitTable::default())
}

/// Amounts written as digits (`200000`, `2,00,000`, `1.5`), digits with
/// multipliers (`2 million`, `50 lakh`) or number words that include a
/// multiplier (`two lakh fifty thousand`). Bare number words such as "one"
/// are not amounts.
pub fn extract_monetary_amounts_with(text: &str, units: &UnitTable) -> Vec<f64> {
    let lower = text.to_lowercase();
    let tokens: Vec<&str> = amount_token_re()
        .find_iter(&lower)
        .map(|m| m.as_str())
        .collect();
    let multiplier = |t: &str| {
        if t == "hundred" {
            Some(100.0)
        } else {
            units.units.get(t).copied()
        }
    };
    let mut amounts = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        if tok.as_bytes()[0].is_ascii_digit() {
            let mut value: f64 = tok.replace(',', "").parse().unwrap_or(0.0);
            i += 1;
            while let Some(m) = tokens.get(i).and_then(|t| multiplier(t)) {
                value *= m;
                i += 1;
            }
            amounts.push(value);
        } else if word_value(tok).is_some() {
            let (mut total, mut current) = (0.0, 0.0);
            let mut saw_multiplier = false;
            while i < tokens.len() {
                let t = tokens[i];
                if let Some(v) = word_value(t) {
                    current += v;
                } else if t == "hundred" {
                    current = if current == 0.0 { 100.0 } else { current * 100.0 };
                    saw_multiplier = true;
                } else if let Some(m) = units.units.get(t) {
                    total += if current == 0.0 { 1.0 } else { current } * m;
                    current = 0.0;
                    saw_multiplier = true;
                } else if t == "and" && tokens.get(i + 1).is_some_and(|n| word_value(n).is_some()) {
                } else {
                    break;
                }
                i += 1;
            }
            if saw_multiplier {
                amounts.push(total + current);
            }
        } else {
            i += 1;
        }
    }
    amounts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmountSummary {
    pub samples: usize,
    pub samples_with_amount: usize,
    /// First amount of each sample that has one.
    pub first_amounts: Vec<f64>,
    pub mean: Option<f64>,
}

/// Averages the first amount found in each text sample; samples without
/// any amount are counted but do not contribute to the mean.
pub fn average_amount<S: AsRef<str>>(samples: &[S], units: &UnitTable) -> AmountSummary {
    let first_amounts: Vec<f64> = samples
        .iter()
        .filter_map(|s| extract_monetary_amounts_with(s.as_ref(), units).first().copied())
        .collect();
    let mean = (!first_amounts.is_empty())
        .then(|| first_amounts.iter().sum::<f64>() / first_amounts.len() as f64);
    AmountSummary {
        samples: samples.len(),
        samples_with_amount: first_amounts.len(),
        first_amounts,
        mean,
    }
}
