//! Raw incident records and their conversion to word-level tri-gram terms.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tri-gram window.
pub const DEFAULT_NGRAM: usize = 3;

/// One incident report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub narrative: String,
    #[serde(default)]
    pub category: String,
    /// Ground-truth series label. Only the evaluation code looks at it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
}

/// Records in file order with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordSet {
    records: Vec<Record>,
}

impl RecordSet {
    /// Fails with [`Error::DuplicateId`] on the first repeated id.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.id.is_empty() {
                return Err(Error::Format("record with empty id".into()));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Record> {
        self.records.iter()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    /// Map from record id to series label, for evaluation.
    pub fn series_by_id(&self) -> HashMap<&str, Option<&str>> {
        self.records.iter().map(|r| (r.id.as_str(), r.series.as_deref())).collect()
    }

    /// Write as JSON lines, one record per line.
    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

impl<'a> IntoIterator for &'a RecordSet {
    type Item = &'a Record;
    type IntoIter = std::slice::Iter<'a, Record>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl RecordFormat {
    /// Guess from the file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => RecordFormat::Csv,
            _ => RecordFormat::Jsonl,
        }
    }
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(RecordFormat::Jsonl),
            "csv" => Ok(RecordFormat::Csv),
            other => Err(Error::config(format!("unknown record format {other:?}"))),
        }
    }
}

/// Load records in file order. Required fields are `id` and `narrative`.
pub fn load_records(path: impl AsRef<Path>, format: RecordFormat) -> Result<RecordSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let records = match format {
        RecordFormat::Jsonl => read_jsonl(BufReader::new(file), path)?,
        RecordFormat::Csv => read_csv(file)?,
    };
    RecordSet::new(records)
}

fn read_jsonl(reader: impl BufRead, path: &Path) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct CsvRow {
    id: String,
    narrative: String,
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    series: Option<String>,
}

fn read_csv(reader: impl std::io::Read) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        out.push(Record {
            id: row.id,
            narrative: row.narrative,
            category: row.category.unwrap_or_default(),
            series: row.series.filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}

/// Lowercase stopword set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

const DEFAULT_STOPWORDS: &str = include_str!("stopwords_en.txt");

impl Stopwords {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The shipped English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// One term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

/// Lowercase word tokens: maximal alphanumeric runs, apostrophes dropped,
/// everything else a separator, stopwords removed.
pub fn clean_text(raw: &str, stopwords: &Stopwords) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        if !current.is_empty() {
            let tok = std::mem::take(current);
            if !stopwords.contains(&tok) {
                tokens.push(tok);
            }
        }
    };
    for ch in raw.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !is_apostrophe(ch) {
            flush(&mut current);
        }
    }
    flush(&mut current);
    tokens
}

/// Sliding windows of `width` tokens joined by single spaces.
pub fn ngrams(tokens: &[String], width: usize) -> Vec<String> {
    if width == 0 {
        return Vec::new();
    }
    tokens.windows(width).map(|w| w.join(" ")).collect()
}

pub fn trigrams(tokens: &[String]) -> Vec<String> {
    ngrams(tokens, DEFAULT_NGRAM)
}

/// A record reduced to its tri-gram terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub record_id: String,
    pub terms: Vec<String>,
}

pub fn tokenize_corpus(records: &RecordSet, stopwords: &Stopwords) -> Vec<TokenizedDoc> {
    tokenize_corpus_with(records, stopwords, DEFAULT_NGRAM)
}

pub fn tokenize_corpus_with(records: &RecordSet, stopwords: &Stopwords, width: usize) -> Vec<TokenizedDoc> {
    records
        .iter()
        .map(|r| TokenizedDoc { record_id: r.id.clone(), terms: ngrams(&clean_text(&r.narrative, stopwords), width) })
        .collect()
}
