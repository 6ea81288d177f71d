//! JSONL article input.
//!
//! One record per line:
//!
//! ```json
//! {"id": "a1", "time": "2023-01-01T08:00:00Z", "title": "Storm hits", "text": "Storm hits the coast. Rescue begins.", "label": "storm"}
//! {"id": "a2", "time": 1672560000, "sentences": ["Storm hits.", "Rescue begins."]}
//! ```
//!
//! `time` is an ISO-8601 instant (a bare date or a zone-less date-time is read
//! as UTC) or integer Unix seconds. Exactly one of `text` and `sentences` is
//! required. A title, when present, becomes the first sentence.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::model::{Article, Timestamp};
use crate::tokenize::{content_tokens, extract_terms, split_sentences, Stopwords};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("line {line}: duplicate article id {id:?} (first seen on line {first})")]
    DuplicateId { line: usize, id: String, first: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordTime {
    Epoch(i64),
    Iso(String),
}

impl RecordTime {
    /// Unix seconds, UTC.
    pub fn epoch_seconds(&self) -> Result<i64, String> {
        match self {
            RecordTime::Epoch(s) => Ok(*s),
            RecordTime::Iso(text) => parse_iso8601(text),
        }
    }
}

fn parse_iso8601(text: &str) -> Result<i64, String> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Ok(t.timestamp());
    }
    for format in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(text, format) {
            return Ok(t.and_utc().timestamp());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Ok(d.and_time(chrono::NaiveTime::MIN).and_utc().timestamp());
    }
    Err(format!("unrecognized time {text:?} (expected ISO-8601 or integer epoch seconds)"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub id: String,
    pub time: RecordTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ArticleRecord {
    /// Tokenizes the record. Sentences without a single content word are
    /// dropped; `Ok(None)` means nothing usable was left.
    pub fn to_article(&self, slide_seconds: u64, stopwords: &Stopwords) -> Result<Option<Article>, String> {
        if self.id.is_empty() {
            return Err("empty article id".into());
        }
        let body = match (&self.text, &self.sentences) {
            (Some(text), None) => split_sentences(text),
            (None, Some(sentences)) => sentences.clone(),
            (Some(_), Some(_)) => return Err(format!("article {}: give either text or sentences, not both", self.id)),
            (None, None) => return Err(format!("article {}: neither text nor sentences present", self.id)),
        };
        let epoch = self.time.epoch_seconds().map_err(|e| format!("article {}: {e}", self.id))?;
        let time = Timestamp::new(epoch, slide_seconds).map_err(|e| e.to_string())?;

        let title = self.title.iter().map(|t| t.trim().to_string());
        let (sentences, sentence_terms): (Vec<String>, Vec<_>) = title
            .chain(body.into_iter().map(|s| s.trim().to_string()))
            .filter(|s| !content_tokens(s, stopwords).is_empty())
            .map(|s| {
                let terms = extract_terms(&s, stopwords);
                (s, terms)
            })
            .unzip();
        if sentences.is_empty() {
            return Ok(None);
        }
        Ok(Some(Article {
            id: self.id.clone(),
            time,
            sentences,
            sentence_terms,
            label: self.label.clone(),
        }))
    }
}

/// Parses JSONL records, skipping blank lines. Returns `(line number, record)`
/// pairs with 1-based line numbers. Duplicate ids are an error.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<(usize, ArticleRecord)>, IngestError> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ArticleRecord = serde_json::from_str(&line).map_err(|e| IngestError::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(&first) = seen.get(&record.id) {
            return Err(IngestError::DuplicateId {
                line: line_no,
                id: record.id,
                first,
            });
        }
        seen.insert(record.id.clone(), line_no);
        records.push((line_no, record));
    }
    Ok(records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<(usize, ArticleRecord)>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_records(BufReader::new(file))
}

/// Turns records into articles, rejecting malformed ones with their line
/// number and skipping (with a warning) those left without sentences.
pub fn records_to_articles(
    records: &[(usize, ArticleRecord)],
    slide_seconds: u64,
    stopwords: &Stopwords,
) -> Result<Vec<Article>, IngestError> {
    let mut articles = Vec::with_capacity(records.len());
    for (line, record) in records {
        match record.to_article(slide_seconds, stopwords) {
            Ok(Some(article)) => articles.push(article),
            Ok(None) => log::warn!("line {line}: article {} has no content sentences; skipped", record.id),
            Err(message) => return Err(IngestError::Record { line: *line, message }),
        }
    }
    Ok(articles)
}

pub fn load_articles(path: &Path, slide_seconds: u64, stopwords: &Stopwords) -> Result<Vec<Article>, IngestError> {
    records_to_articles(&read_records_file(path)?, slide_seconds, stopwords)
}

pub fn write_records<W: Write>(mut writer: W, records: &[ArticleRecord]) -> io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Gold label per article id, for records that carry one.
pub fn gold_labels<'a>(records: impl IntoIterator<Item = &'a ArticleRecord>) -> HashMap<String, String> {
    records
        .into_iter()
        .filter_map(|r| r.label.as_ref().map(|l| (r.id.clone(), l.clone())))
        .collect()
}
