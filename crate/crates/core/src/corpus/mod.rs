//! Corpus ingestion: sharded JSONL (optionally gzip'd) and plain-text
//! directories, sentence segmentation and scan-time normalisation.

mod segment;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;
use walkdir::WalkDir;

pub use segment::{is_abbreviation, segment_sentences};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty record")]
    EmptyRecord,
    #[error("decode error: {0}")]
    Decode(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("shard {path}: {message}")]
    Shard { path: PathBuf, message: String },
    #[error("no shards found under {0}")]
    NoShards(PathBuf),
}

/// One corpus record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "id", default)]
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub collection_title: String,
    #[serde(default)]
    pub pub_place: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pub_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sentences: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
            ..Default::default()
        }
    }

    /// Fills `sentences` from `text` unless they were supplied by the record.
    pub fn segmented(mut self) -> Self {
        if self.sentences.is_empty() {
            self.sentences = segment_sentences(&self.text);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordFormat {
    JsonlGz,
    Jsonl,
    PlainTextDir,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub shard_paths: Vec<PathBuf>,
    pub record_format: RecordFormat,
}

impl ShardManifest {
    pub fn new(shard_paths: Vec<PathBuf>, record_format: RecordFormat) -> Self {
        ShardManifest {
            shard_paths,
            record_format,
        }
    }

    /// Builds a manifest from a path.
    ///
    /// A file becomes a single shard (gzip when it ends in `.gz`). A
    /// directory is searched recursively for `.gz` shards; when none exist,
    /// `.jsonl` files are used, and failing that the directory itself is
    /// read as a plain-text document directory. Shards are sorted by path.
    pub fn discover(root: &Path) -> Result<Self, CorpusError> {
        if root.is_file() {
            let format = if has_extension(root, "gz") {
                RecordFormat::JsonlGz
            } else {
                RecordFormat::Jsonl
            };
            return Ok(ShardManifest::new(vec![root.to_path_buf()], format));
        }
        if !root.is_dir() {
            return Err(CorpusError::Shard {
                path: root.to_path_buf(),
                message: "not found".into(),
            });
        }
        let mut gz = Vec::new();
        let mut jsonl = Vec::new();
        let mut txt = false;
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| CorpusError::Shard {
                path: root.to_path_buf(),
                message: e.to_string(),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let path = entry.path();
            if has_extension(path, "gz") {
                gz.push(path.to_path_buf());
            } else if has_extension(path, "jsonl") {
                jsonl.push(path.to_path_buf());
            } else if has_extension(path, "txt") {
                txt = true;
            }
        }
        if !gz.is_empty() {
            Ok(ShardManifest::new(gz, RecordFormat::JsonlGz))
        } else if !jsonl.is_empty() {
            Ok(ShardManifest::new(jsonl, RecordFormat::Jsonl))
        } else if txt {
            Ok(ShardManifest::new(
                vec![root.to_path_buf()],
                RecordFormat::PlainTextDir,
            ))
        } else {
            Err(CorpusError::NoShards(root.to_path_buf()))
        }
    }

    /// Per-shard manifests, for one-shard-per-worker scans.
    pub fn split(&self) -> Vec<ShardManifest> {
        self.shard_paths
            .iter()
            .map(|p| ShardManifest::new(vec![p.clone()], self.record_format))
            .collect()
    }

    pub fn stream(&self) -> RecordStream<'_> {
        stream_records(self)
    }
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some(ext)
}

/// `tries` counts parsed records and `excepts` decode/IO failures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanCounters {
    pub tries: u64,
    pub excepts: u64,
}

impl ScanCounters {
    pub fn merge(self, other: ScanCounters) -> ScanCounters {
        ScanCounters {
            tries: self.tries + other.tries,
            excepts: self.excepts + other.excepts,
        }
    }

    pub fn lines(&self) -> u64 {
        self.tries + self.excepts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardError {
    pub path: PathBuf,
    pub message: String,
}

/// A parsed record with its position in the manifest.
#[derive(Debug, Clone)]
pub struct Record {
    pub shard: usize,
    pub line: usize,
    pub doc: Document,
}

/// Parses one raw record.
///
/// JSONL records need a string `text` field; `id` is optional and left
/// empty when absent (the stream fills it from shard path and line number).
/// In plain-text mode the whole input is the document text.
pub fn parse_record(raw: &str, format: RecordFormat) -> Result<Document, CorpusError> {
    if raw.trim().is_empty() {
        return Err(CorpusError::EmptyRecord);
    }
    match format {
        RecordFormat::PlainTextDir => Ok(Document::new(String::new(), raw)),
        RecordFormat::Jsonl | RecordFormat::JsonlGz => {
            let value: serde_json::Value =
                serde_json::from_str(raw).map_err(|e| CorpusError::Decode(e.to_string()))?;
            let obj = value
                .as_object()
                .ok_or_else(|| CorpusError::Schema("record is not a JSON object".into()))?;
            match obj.get("text") {
                Some(serde_json::Value::String(_)) => {}
                Some(_) => return Err(CorpusError::Schema("`text` is not a string".into())),
                None => return Err(CorpusError::Schema("missing `text` field".into())),
            }
            // ids are sometimes numeric in the wild
            let mut value = value;
            if let Some(id) = value.get("id").filter(|v| !v.is_string()).cloned() {
                value["id"] = serde_json::Value::String(match id {
                    serde_json::Value::Null => String::new(),
                    other => other.to_string(),
                });
            }
            serde_json::from_value(value).map_err(|e| CorpusError::Schema(e.to_string()))
        }
    }
}

/// Lazily streams every parseable record of a manifest, shard order then
/// line order. Unreadable shards are recorded in [`RecordStream::shard_errors`]
/// and skipped; blank lines are ignored.
pub fn stream_records(manifest: &ShardManifest) -> RecordStream<'_> {
    RecordStream {
        manifest,
        shard: 0,
        source: None,
        counters: ScanCounters::default(),
        errors: Vec::new(),
    }
}

enum Source {
    Lines {
        reader: Box<dyn BufRead + Send>,
        line: usize,
        buf: Vec<u8>,
    },
    Files {
        files: std::vec::IntoIter<PathBuf>,
        index: usize,
    },
}

pub struct RecordStream<'a> {
    manifest: &'a ShardManifest,
    shard: usize,
    source: Option<Source>,
    counters: ScanCounters,
    errors: Vec<ShardError>,
}

impl RecordStream<'_> {
    pub fn counters(&self) -> ScanCounters {
        self.counters
    }

    pub fn shard_errors(&self) -> &[ShardError] {
        &self.errors
    }

    pub fn into_parts(self) -> (ScanCounters, Vec<ShardError>) {
        (self.counters, self.errors)
    }

    fn shard_path(&self) -> &Path {
        &self.manifest.shard_paths[self.shard]
    }

    fn fail_shard(&mut self, message: String) {
        self.errors.push(ShardError {
            path: self.shard_path().to_path_buf(),
            message,
        });
    }

    fn open(&mut self) -> Option<Source> {
        let path = self.shard_path().to_path_buf();
        match self.manifest.record_format {
            RecordFormat::PlainTextDir => {
                let mut files: Vec<PathBuf> = match std::fs::read_dir(&path) {
                    Ok(rd) => rd
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| p.is_file() && has_extension(p, "txt"))
                        .collect(),
                    Err(e) => {
                        self.fail_shard(e.to_string());
                        return None;
                    }
                };
                files.sort();
                Some(Source::Files {
                    files: files.into_iter(),
                    index: 0,
                })
            }
            format => match File::open(&path) {
                Ok(file) => {
                    let reader: Box<dyn BufRead + Send> = if format == RecordFormat::JsonlGz {
                        Box::new(BufReader::new(MultiGzDecoder::new(BufReader::new(file))))
                    } else {
                        Box::new(BufReader::new(file))
                    };
                    Some(Source::Lines {
                        reader,
                        line: 0,
                        buf: Vec::new(),
                    })
                }
                Err(e) => {
                    self.fail_shard(e.to_string());
                    None
                }
            },
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Step {
    Yield(Document, usize),
    Skip,
    Done,
}

impl Iterator for RecordStream<'_> {
    type Item = Record;

    fn next(&mut self) -> Option<Record> {
        loop {
            if self.shard >= self.manifest.shard_paths.len() {
                return None;
            }
            if self.source.is_none() {
                match self.open() {
                    Some(src) => self.source = Some(src),
                    None => {
                        self.shard += 1;
                        continue;
                    }
                }
            }
            let shard_path = self.shard_path().to_path_buf();
            let step = match self.source.as_mut().expect("source opened") {
                Source::Lines { reader, line, buf } => {
                    buf.clear();
                    match reader.read_until(b'\n', buf) {
                        Ok(0) => Step::Done,
                        Ok(_) => {
                            *line += 1;
                            let lineno = *line;
                            match std::str::from_utf8(buf) {
                                Err(_) => {
                                    self.counters.excepts += 1;
                                    Step::Skip
                                }
                                Ok(s) if s.trim().is_empty() => Step::Skip,
                                Ok(s) => match parse_record(s, self.manifest.record_format) {
                                    Ok(mut doc) => {
                                        self.counters.tries += 1;
                                        if doc.doc_id.is_empty() {
                                            doc.doc_id =
                                                format!("{}:{}", shard_path.display(), lineno);
                                        }
                                        Step::Yield(doc, lineno)
                                    }
                                    Err(_) => {
                                        self.counters.excepts += 1;
                                        Step::Skip
                                    }
                                },
                            }
                        }
                        Err(e) => {
                            // a broken stream cannot be resynchronised
                            self.counters.excepts += 1;
                            self.errors.push(ShardError {
                                path: shard_path.clone(),
                                message: e.to_string(),
                            });
                            Step::Done
                        }
                    }
                }
                Source::Files { files, index } => match files.next() {
                    None => Step::Done,
                    Some(file) => {
                        *index += 1;
                        let idx = *index;
                        match read_plain_document(&file) {
                            Ok(doc) => {
                                self.counters.tries += 1;
                                Step::Yield(doc, idx)
                            }
                            Err(_) => {
                                self.counters.excepts += 1;
                                Step::Skip
                            }
                        }
                    }
                },
            };
            match step {
                Step::Yield(doc, line) => {
                    return Some(Record {
                        shard: self.shard,
                        line,
                        doc,
                    })
                }
                Step::Skip => continue,
                Step::Done => {
                    self.source = None;
                    self.shard += 1;
                }
            }
        }
    }
}

#[derive(Deserialize, Default)]
struct Sidecar {
    #[serde(default)]
    title: String,
    #[serde(default)]
    author: String,
    #[serde(default)]
    collection_title: String,
    #[serde(default)]
    pub_place: String,
    #[serde(default)]
    pub_year: Option<i32>,
    #[serde(default)]
    genre: Option<String>,
    #[serde(default)]
    language: Option<String>,
}

/// Reads `<stem>.txt` plus an optional `<stem>.json` metadata sidecar.
fn read_plain_document(path: &Path) -> Result<Document, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Decode(e.to_string()))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let mut doc = parse_record(&text, RecordFormat::PlainTextDir)?;
    doc.doc_id = stem;
    let sidecar = path.with_extension("json");
    if sidecar.is_file() {
        let raw =
            std::fs::read_to_string(&sidecar).map_err(|e| CorpusError::Decode(e.to_string()))?;
        let meta: Sidecar =
            serde_json::from_str(&raw).map_err(|e| CorpusError::Decode(e.to_string()))?;
        doc.title = meta.title;
        doc.author = meta.author;
        doc.collection_title = meta.collection_title;
        doc.pub_place = meta.pub_place;
        doc.pub_year = meta.pub_year;
        doc.genre = meta.genre;
        doc.language = meta.language;
    }
    Ok(doc)
}

/// Loads every document of a manifest, segmented, sorted by `doc_id`.
pub fn load_documents(
    manifest: &ShardManifest,
) -> Result<(Vec<Document>, ScanCounters, Vec<ShardError>), CorpusError> {
    let mut stream = stream_records(manifest);
    let mut docs: Vec<Document> = stream.by_ref().map(|r| r.doc.segmented()).collect();
    let (counters, errors) = stream.into_parts();
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    for pair in docs.windows(2) {
        if pair[0].doc_id == pair[1].doc_id {
            return Err(CorpusError::Schema(format!(
                "duplicate doc_id {}",
                pair[0].doc_id
            )));
        }
    }
    Ok((docs, counters, errors))
}

/// Canonical composition, whitespace runs collapsed to one space, trimmed.
/// Case is preserved.
pub fn normalize(text: &str) -> String {
    let composed: String = text.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
