//! Word lists and lookup tables consumed by the analyses.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("valence {value} for {token:?} outside [1, 10]")]
    OutOfRangeValence { token: String, value: f64 },
    #[error("missing column {0:?}")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("unknown religion label {0:?}")]
    UnknownReligion(String),
    #[error("unknown place kind {0:?}")]
    UnknownPlaceKind(String),
    #[error("place {0:?} has no aliases")]
    NoAliases(String),
    #[error("invalid WEAT spec: {0}")]
    InvalidWeatSpec(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = LexiconError> = std::result::Result<T, E>;

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn require_columns(reader: &mut csv::Reader<impl Read>, cols: &[&'static str]) -> Result<Vec<usize>> {
    let headers = reader.headers()?.clone();
    cols.iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or(LexiconError::MissingColumn(c))
        })
        .collect()
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub const VALENCE_MIN: f64 = 1.0;
pub const VALENCE_MAX: f64 = 10.0;

/// Token → valence on a 1 to 10 scale.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValenceLexicon {
    ratings: BTreeMap<String, f64>,
}

/// Outcome of reading a valence file.
#[derive(Debug, Clone, PartialEq)]
pub struct ValenceLoad {
    pub lexicon: ValenceLexicon,
    /// Rows whose token had already been seen; the later row wins.
    pub duplicates: usize,
    /// Multi-word entries, which are not supported and are skipped.
    pub skipped_multiword: usize,
}

impl ValenceLexicon {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut ratings = BTreeMap::new();
        for (token, value) in pairs {
            check_valence(token, value)?;
            ratings.insert(token.to_lowercase(), value);
        }
        Ok(ValenceLexicon { ratings })
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.ratings.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.ratings.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn from_reader(reader: impl Read) -> Result<ValenceLoad> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let idx = require_columns(&mut rdr, &["token", "valence"])?;
        let mut ratings = BTreeMap::new();
        let (mut duplicates, mut skipped_multiword) = (0, 0);
        for record in rdr.records() {
            let record = record?;
            let token = record.get(idx[0]).unwrap_or("").to_lowercase();
            let raw = record.get(idx[1]).unwrap_or("");
            let value: f64 = raw.parse().map_err(|_| LexiconError::BadRow {
                line: line_of(&record),
                message: format!("valence {raw:?} is not a number"),
            })?;
            check_valence(&token, value)?;
            if token.split_whitespace().count() != 1 {
                skipped_multiword += 1;
                continue;
            }
            if ratings.insert(token, value).is_some() {
                duplicates += 1;
            }
        }
        Ok(ValenceLoad {
            lexicon: ValenceLexicon { ratings },
            duplicates,
            skipped_multiword,
        })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["token", "valence"])?;
        for (k, v) in self.iter() {
            w.write_record([k, &v.to_string()])?;
        }
        w.flush().map_err(|source| LexiconError::Io {
            path: "<writer>".into(),
            source,
        })
    }

    /// Small bundled lexicon for tests and examples. Ratings other than a
    /// handful of reference words are illustrative.
    pub fn bundled_test() -> Self {
        Self::from_reader(include_str!("../data/valence_test.csv").as_bytes())
            .expect("bundled lexicon is valid")
            .lexicon
    }
}

fn check_valence(token: &str, value: f64) -> Result<()> {
    if !(VALENCE_MIN..=VALENCE_MAX).contains(&value) {
        return Err(LexiconError::OutOfRangeValence {
            token: token.to_string(),
            value,
        });
    }
    Ok(())
}

pub fn load_valence_lexicon(path: &Path) -> Result<ValenceLoad> {
    ValenceLexicon::from_reader(open(path)?)
}

/// Target sets `s1`/`s2` and attribute sets `a1`/`a2` for a WEAT run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWeatSpec")]
pub struct WeatSpec {
    pub s1: Vec<String>,
    pub s2: Vec<String>,
    pub a1: Vec<String>,
    pub a2: Vec<String>,
}

#[derive(Deserialize)]
struct RawWeatSpec {
    s1: Vec<String>,
    s2: Vec<String>,
    a1: Vec<String>,
    a2: Vec<String>,
}

impl TryFrom<RawWeatSpec> for WeatSpec {
    type Error = LexiconError;

    fn try_from(r: RawWeatSpec) -> Result<Self> {
        WeatSpec::new(r.s1, r.s2, r.a1, r.a2)
    }
}

fn check_unique(name: &str, set: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for w in set {
        if !seen.insert(w) {
            return Err(LexiconError::InvalidWeatSpec(format!("{name} repeats {w:?}")));
        }
    }
    Ok(())
}

impl WeatSpec {
    pub fn new(s1: Vec<String>, s2: Vec<String>, a1: Vec<String>, a2: Vec<String>) -> Result<Self> {
        if s1.is_empty() || s1.len() != s2.len() {
            return Err(LexiconError::InvalidWeatSpec(format!(
                "target sets must be non-empty and equal-sized, got {} and {}",
                s1.len(),
                s2.len()
            )));
        }
        if a1.is_empty() || a2.is_empty() {
            return Err(LexiconError::InvalidWeatSpec("attribute sets must be non-empty".into()));
        }
        for (name, set) in [("s1", &s1), ("s2", &s2), ("a1", &a1), ("a2", &a2)] {
            check_unique(name, set)?;
        }
        Ok(WeatSpec { s1, s2, a1, a2 })
    }

    pub fn from_strs(s1: &[&str], s2: &[&str], a1: &[&str], a2: &[&str]) -> Result<Self> {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self::new(own(s1), own(s2), own(a1), own(a2))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn swapped_targets(&self) -> Self {
        WeatSpec {
            s1: self.s2.clone(),
            s2: self.s1.clone(),
            ..self.clone()
        }
    }

    pub fn swapped_attributes(&self) -> Self {
        WeatSpec {
            a1: self.a2.clone(),
            a2: self.a1.clone(),
            ..self.clone()
        }
    }
}

pub const GENDER_OCCUPATIONS_MALE: [&str; 12] = [
    "maestro",
    "skipper",
    "protege",
    "philosopher",
    "captain",
    "architect",
    "financier",
    "warrior",
    "broadcaster",
    "magician",
    "pilot",
    "boss",
];

pub const GENDER_OCCUPATIONS_FEMALE: [&str; 12] = [
    "homemaker",
    "nurse",
    "receptionist",
    "librarian",
    "socialite",
    "hairdresser",
    "nanny",
    "bookkeeper",
    "stylist",
    "housekeeper",
    "designer",
    "counselor",
];

pub const MALE_ATTRIBUTES: [&str; 3] = ["he", "man", "male"];
pub const FEMALE_ATTRIBUTES: [&str; 3] = ["she", "woman", "female"];

/// Male- and female-stereotyped occupations against gendered attribute words.
pub fn builtin_weat_gender_occupations() -> WeatSpec {
    WeatSpec::from_strs(
        &GENDER_OCCUPATIONS_MALE,
        &GENDER_OCCUPATIONS_FEMALE,
        &MALE_ATTRIBUTES,
        &FEMALE_ATTRIBUTES,
    )
    .expect("builtin spec is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceKind {
    City,
    State,
}

impl FromStr for PlaceKind {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "city" => Ok(PlaceKind::City),
            "state" => Ok(PlaceKind::State),
            _ => Err(LexiconError::UnknownPlaceKind(s.to_string())),
        }
    }
}

impl fmt::Display for PlaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlaceKind::City => "city",
            PlaceKind::State => "state",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Place {
    pub kind: PlaceKind,
    /// Token sequences, each already tokenized and lowercase.
    pub aliases: Vec<Vec<String>>,
}

/// Canonical place names with all their surface aliases.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gazetteer {
    entries: BTreeMap<String, Place>,
}

impl Gazetteer {
    pub fn insert(&mut self, canonical: &str, kind: PlaceKind, aliases: &[&str]) -> Result<()> {
        let aliases: Vec<Vec<String>> = aliases
            .iter()
            .map(|a| tokenize(a))
            .filter(|t| !t.is_empty())
            .collect();
        if aliases.is_empty() {
            return Err(LexiconError::NoAliases(canonical.to_string()));
        }
        self.entries
            .insert(canonical.to_string(), Place { kind, aliases });
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Place)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn get(&self, canonical: &str) -> Option<&Place> {
        self.entries.get(canonical)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn of_kind(&self, kind: PlaceKind) -> Gazetteer {
        Gazetteer {
            entries: self
                .entries
                .iter()
                .filter(|(_, p)| p.kind == kind)
                .map(|(k, p)| (k.clone(), p.clone()))
                .collect(),
        }
    }

    /// Reads `canonical,kind,aliases` rows; aliases are `;`-separated.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let idx = require_columns(&mut rdr, &["canonical", "kind", "aliases"])?;
        let mut g = Gazetteer::default();
        for record in rdr.records() {
            let record = record?;
            let canonical = record.get(idx[0]).unwrap_or("");
            let kind: PlaceKind = record.get(idx[1]).unwrap_or("").parse()?;
            let aliases: Vec<&str> = record.get(idx[2]).unwrap_or("").split(';').collect();
            g.insert(canonical, kind, &aliases)?;
        }
        Ok(g)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["canonical", "kind", "aliases"])?;
        for (name, place) in self.entries() {
            let aliases: Vec<String> = place.aliases.iter().map(|a| a.join(" ")).collect();
            w.write_record([name, &place.kind.to_string(), &aliases.join(";")])?;
        }
        w.flush().map_err(|source| LexiconError::Io {
            path: "<writer>".into(),
            source,
        })
    }

    /// Indian states and major cities, including renamed-city aliases.
    pub fn bundled_india() -> Self {
        Self::from_reader(include_str!("../data/gazetteer_india.csv").as_bytes())
            .expect("bundled gazetteer is valid")
    }
}

pub fn load_gazetteer(path: &Path) -> Result<Gazetteer> {
    Gazetteer::from_reader(open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Religion {
    Hindu,
    Muslim,
    Sikh,
    Christian,
    Parsi,
    Multiple,
}

impl Religion {
    pub const ALL: [Religion; 6] = [
        Religion::Hindu,
        Religion::Muslim,
        Religion::Sikh,
        Religion::Christian,
        Religion::Parsi,
        Religion::Multiple,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Religion::Hindu => "hindu",
            Religion::Muslim => "muslim",
            Religion::Sikh => "sikh",
            Religion::Christian => "christian",
            Religion::Parsi => "parsi",
            Religion::Multiple => "multiple",
        }
    }
}

impl FromStr for Religion {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Religion::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or(LexiconError::UnknownReligion(s))
    }
}

impl fmt::Display for Religion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// Annotated surname → religion labels. Keys are lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReligionMap {
    mapping: BTreeMap<String, Religion>,
}

impl ReligionMap {
    pub fn insert(&mut self, surname: &str, label: Religion) {
        self.mapping.insert(surname.to_lowercase(), label);
    }

    pub fn get(&self, surname: &str) -> Option<Religion> {
        self.mapping.get(&surname.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Religion)> {
        self.mapping.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let idx = require_columns(&mut rdr, &["surname", "label"])?;
        let mut map = ReligionMap::default();
        for record in rdr.records() {
            let record = record?;
            let label = record.get(idx[1]).unwrap_or("").parse()?;
            map.insert(record.get(idx[0]).unwrap_or(""), label);
        }
        Ok(map)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["surname", "label"])?;
        for (k, v) in self.iter() {
            w.write_record([k, v.as_str()])?;
        }
        w.flush().map_err(|source| LexiconError::Io {
            path: "<writer>".into(),
            source,
        })
    }
}

impl FromIterator<(&'static str, Religion)> for ReligionMap {
    fn from_iter<I: IntoIterator<Item = (&'static str, Religion)>>(iter: I) -> Self {
        let mut m = ReligionMap::default();
        for (k, v) in iter {
            m.insert(k, v);
        }
        m
    }
}

pub fn load_religion_map(path: &Path) -> Result<ReligionMap> {
    ReligionMap::from_reader(open(path)?)
}
