//! Streaming readers for note and post tables.
//!
//! Readers yield one `Result<Document, RecordError>` per input record that
//! survives filtering. A malformed record becomes an `Err` item and reading
//! continues with the next one; only an I/O failure ends the stream. Memory
//! use is bounded by one record.

use std::borrow::Cow;
use std::fmt;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIMIC_DISCHARGE_CATEGORY: &str = "Discharge summary";
pub const MIMIC_REQUIRED_COLUMNS: [&str; 5] = ["ROW_ID", "SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Mimic,
    Reddit,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source_tag: SourceTag,
    /// MIMIC note category or subreddit name.
    pub group: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            source_tag: SourceTag::Generic,
            group: String::new(),
            text: text.into(),
        }
    }
}

/// A record that could not be turned into a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    /// 1-based record number (header excluded).
    pub record: u64,
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "record {} (line {}): {}", self.record, line, self.message),
            None => write!(f, "record {}: {}", self.record, self.message),
        }
    }
}

impl std::error::Error for RecordError {}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("failed to read header: {0}")]
    Header(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReaderConfig {
    pub format: TableFormat,
    /// When absent, ids are `<source_name>:<record number>`.
    pub id_column: Option<String>,
    pub text_column: String,
    pub group_column: Option<String>,
    /// Keep only records whose column equals the value.
    pub filter: Option<(String, String)>,
    pub source_name: String,
    pub source_tag: SourceTag,
    /// Columns that must appear in a CSV header.
    pub required_columns: Vec<String>,
}

impl ReaderConfig {
    /// Defaults for the Reddit mental-health post tables: text in `post`,
    /// subreddit in `subreddit`, no id column.
    pub fn reddit(format: TableFormat, source_name: impl Into<String>) -> Self {
        ReaderConfig {
            format,
            id_column: None,
            text_column: "post".into(),
            group_column: Some("subreddit".into()),
            filter: None,
            source_name: source_name.into(),
            source_tag: SourceTag::Reddit,
            required_columns: Vec::new(),
        }
    }

    /// NOTEEVENTS-style table restricted to discharge summaries.
    pub fn mimic() -> Self {
        ReaderConfig {
            format: TableFormat::Csv,
            id_column: Some("ROW_ID".into()),
            text_column: "TEXT".into(),
            group_column: Some("CATEGORY".into()),
            filter: Some(("CATEGORY".into(), MIMIC_DISCHARGE_CATEGORY.into())),
            source_name: "mimic".into(),
            source_tag: SourceTag::Mimic,
            required_columns: MIMIC_REQUIRED_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn generic(format: TableFormat, text_column: impl Into<String>, source_name: impl Into<String>) -> Self {
        ReaderConfig {
            format,
            id_column: None,
            text_column: text_column.into(),
            group_column: None,
            filter: None,
            source_name: source_name.into(),
            source_tag: SourceTag::Generic,
            required_columns: Vec::new(),
        }
    }
}

/// Per-reader counters. `read == yielded + filtered + malformed` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderStats {
    pub read: u64,
    pub yielded: u64,
    pub filtered: u64,
    pub malformed: u64,
    /// Records in which invalid UTF-8 was replaced.
    pub lossy_records: u64,
}

pub struct DocumentReader<R: Read> {
    inner: Inner<R>,
    config: ReaderConfig,
    stats: ReaderStats,
    done: bool,
}

enum Inner<R: Read> {
    Csv {
        reader: csv::Reader<R>,
        record: csv::ByteRecord,
        id: Option<usize>,
        text: usize,
        group: Option<usize>,
        filter: Option<(usize, String)>,
    },
    Jsonl {
        reader: BufReader<R>,
        buf: Vec<u8>,
        line: u64,
    },
}

/// Discharge summaries from a NOTEEVENTS-style CSV.
pub fn read_mimic_notes<R: Read>(source: R) -> Result<DocumentReader<R>, CorpusError> {
    DocumentReader::new(source, ReaderConfig::mimic())
}

/// Posts from a CSV or JSON-lines table.
pub fn read_reddit_posts<R: Read>(source: R, config: ReaderConfig) -> Result<DocumentReader<R>, CorpusError> {
    DocumentReader::new(source, config)
}

fn column_index(headers: &csv::ByteRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| {
        let h = String::from_utf8_lossy(h);
        h.trim_start_matches('\u{feff}').trim() == name
    })
}

impl<R: Read> DocumentReader<R> {
    pub fn new(source: R, config: ReaderConfig) -> Result<Self, CorpusError> {
        let inner = match config.format {
            TableFormat::Csv => {
                let mut reader = csv::ReaderBuilder::new()
                    .has_headers(true)
                    .flexible(false)
                    .from_reader(source);
                let headers = reader
                    .byte_headers()
                    .map_err(|e| match e.into_kind() {
                        csv::ErrorKind::Io(io) => CorpusError::Io(io),
                        other => CorpusError::Header(format!("{other:?}")),
                    })?
                    .clone();
                // a completely empty file has no header and no records
                let empty = headers.is_empty();
                let need = |name: &str| -> Result<usize, CorpusError> {
                    if empty {
                        return Ok(0);
                    }
                    column_index(&headers, name).ok_or_else(|| CorpusError::MissingColumn(name.to_owned()))
                };
                for c in &config.required_columns {
                    need(c)?;
                }
                let text = need(&config.text_column)?;
                let id = config.id_column.as_deref().map(need).transpose()?;
                let group = config.group_column.as_deref().map(need).transpose()?;
                let filter = match &config.filter {
                    Some((col, value)) => Some((need(col)?, value.clone())),
                    None => None,
                };
                Inner::Csv {
                    reader,
                    record: csv::ByteRecord::new(),
                    id,
                    text,
                    group,
                    filter,
                }
            }
            TableFormat::Jsonl => Inner::Jsonl {
                reader: BufReader::new(source),
                buf: Vec::new(),
                line: 0,
            },
        };
        Ok(DocumentReader {
            inner,
            config,
            stats: ReaderStats::default(),
            done: false,
        })
    }

    pub fn stats(&self) -> ReaderStats {
        self.stats
    }

    fn synthesize_id(&self, record: u64) -> String {
        format!("{}:{}", self.config.source_name, record)
    }

    fn lossy<'b>(&mut self, bytes: &'b [u8], record: u64) -> Cow<'b, str> {
        let s = String::from_utf8_lossy(bytes);
        if matches!(s, Cow::Owned(_)) {
            self.stats.lossy_records += 1;
            log::warn!("record {record}: invalid UTF-8 replaced");
        }
        s
    }

    fn next_csv(&mut self) -> Option<Result<Document, RecordError>> {
        loop {
            let Inner::Csv { reader, record, .. } = &mut self.inner else { unreachable!() };
            let result = reader.read_byte_record(record);
            let n = self.stats.read + 1;
            let rec = match result {
                Ok(false) => return None,
                Ok(true) => {
                    self.stats.read = n;
                    record.clone()
                }
                Err(e) => {
                    let line = e.position().map(|p| p.line());
                    if let csv::ErrorKind::Io(_) = e.kind() {
                        self.done = true;
                    }
                    self.stats.read = n;
                    self.stats.malformed += 1;
                    let err = RecordError {
                        record: n,
                        line,
                        message: csv_error_message(&e),
                    };
                    log::warn!("skipping {err}");
                    return Some(Err(err));
                }
            };
            let Inner::Csv { id, text, group, filter, .. } = &self.inner else { unreachable!() };
            let (id, text, group, filter) = (*id, *text, *group, filter.clone());
            if let Some((col, value)) = &filter {
                let field = rec.get(*col).unwrap_or_default();
                if field != value.as_bytes() {
                    self.stats.filtered += 1;
                    continue;
                }
            }
            let line = rec.position().map(|p| p.line());
            let text = self.lossy(rec.get(text).unwrap_or_default(), n).into_owned();
            let group = match group {
                Some(g) => self.lossy(rec.get(g).unwrap_or_default(), n).into_owned(),
                None => String::new(),
            };
            let id = match id {
                Some(i) => {
                    let v = self.lossy(rec.get(i).unwrap_or_default(), n).trim().to_owned();
                    if v.is_empty() {
                        self.stats.malformed += 1;
                        let err = RecordError {
                            record: n,
                            line,
                            message: "empty id".into(),
                        };
                        log::warn!("skipping {err}");
                        return Some(Err(err));
                    }
                    v
                }
                None => self.synthesize_id(n),
            };
            self.stats.yielded += 1;
            return Some(Ok(Document {
                id,
                source_tag: self.config.source_tag,
                group,
                text,
            }));
        }
    }

    fn next_jsonl(&mut self) -> Option<Result<Document, RecordError>> {
        loop {
            let Inner::Jsonl { reader, buf, line } = &mut self.inner else { unreachable!() };
            buf.clear();
            match reader.read_until(b'\n', buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    self.stats.read += 1;
                    self.stats.malformed += 1;
                    return Some(Err(RecordError {
                        record: self.stats.read,
                        line: Some(*line + 1),
                        message: e.to_string(),
                    }));
                }
            }
            *line += 1;
            let line_no = *line;
            if buf.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let bytes = std::mem::take(buf);
            self.stats.read += 1;
            let n = self.stats.read;
            let decoded = self.lossy(&bytes, n).into_owned();
            if let Inner::Jsonl { buf, .. } = &mut self.inner {
                *buf = bytes;
            }
            let result = self.json_record(&decoded, n);
            match result {
                Ok(Some(doc)) => {
                    self.stats.yielded += 1;
                    return Some(Ok(doc));
                }
                Ok(None) => {
                    self.stats.filtered += 1;
                    continue;
                }
                Err(message) => {
                    self.stats.malformed += 1;
                    let err = RecordError {
                        record: n,
                        line: Some(line_no),
                        message,
                    };
                    log::warn!("skipping {err}");
                    return Some(Err(err));
                }
            }
        }
    }

    fn json_record(&self, line: &str, n: u64) -> Result<Option<Document>, String> {
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let obj = value.as_object().ok_or("record is not a JSON object")?;
        let field = |name: &str| -> Option<String> {
            match obj.get(name)? {
                serde_json::Value::String(s) => Some(s.clone()),
                serde_json::Value::Null => None,
                other => Some(other.to_string()),
            }
        };
        if let Some((col, value)) = &self.config.filter {
            if field(col).as_deref() != Some(value.as_str()) {
                return Ok(None);
            }
        }
        let text = field(&self.config.text_column)
            .ok_or_else(|| format!("missing text field {:?}", self.config.text_column))?;
        let group = match &self.config.group_column {
            Some(g) => field(g).ok_or_else(|| format!("missing group field {g:?}"))?,
            None => String::new(),
        };
        let id = match &self.config.id_column {
            Some(c) => field(c).ok_or_else(|| format!("missing id field {c:?}"))?,
            None => self.synthesize_id(n),
        };
        Ok(Some(Document {
            id,
            source_tag: self.config.source_tag,
            group,
            text,
        }))
    }
}

fn csv_error_message(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len} (unbalanced quoting?)")
        }
        _ => e.to_string(),
    }
}

impl<R: Read> Iterator for DocumentReader<R> {
    type Item = Result<Document, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match self.inner {
            Inner::Csv { .. } => self.next_csv(),
            Inner::Jsonl { .. } => self.next_jsonl(),
        };
        if item.is_none() {
            self.done = true;
        }
        item
    }
}
