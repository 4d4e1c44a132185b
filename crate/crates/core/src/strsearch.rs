//! Sentence-level contamination audit with bad-character Boyer–Moore.
//!
//! `matches(d)` counts (corpus record, sentence) pairs where the sentence is
//! a contiguous byte substring of the record text; a record contributes at
//! most 1 per sentence no matter how often the sentence recurs in it.
//!
//! [`Strategy::Exhaustive`] tests every sentence against every record.
//! [`Strategy::Indexed`] first runs one Aho–Corasick pass over the record
//! for sentence prefixes and only runs Boyer–Moore for sentences whose
//! prefix occurs; a sentence cannot occur without its prefix, so both
//! strategies return identical counts.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, ScanCounters, ShardError, ShardManifest};
use crate::nameaudit::AcAutomaton;

/// Prefix length used by the indexed prefilter.
pub const ANCHOR_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("pattern must be nonempty")]
    EmptyPattern,
    #[error("document {0} has no sentences")]
    NoSentences(String),
    #[error("threshold must be >= 1")]
    InvalidThreshold,
}

/// Last index of each byte in the pattern, or -1.
#[derive(Clone, PartialEq, Eq)]
pub struct BadCharTable {
    last: [isize; 256],
}

impl BadCharTable {
    #[inline]
    pub fn get(&self, byte: u8) -> isize {
        self.last[byte as usize]
    }
}

impl std::fmt::Debug for BadCharTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let present: Vec<(u8, isize)> = (0..=255u8)
            .filter(|&b| self.last[b as usize] >= 0)
            .map(|b| (b, self.last[b as usize]))
            .collect();
        f.debug_struct("BadCharTable").field("present", &present).finish()
    }
}

pub fn bm_preprocess(pattern: &[u8]) -> Result<BadCharTable, SearchError> {
    if pattern.is_empty() {
        return Err(SearchError::EmptyPattern);
    }
    let mut last = [-1isize; 256];
    for (i, &b) in pattern.iter().enumerate() {
        last[b as usize] = i as isize;
    }
    Ok(BadCharTable { last })
}

/// A preprocessed pattern.
#[derive(Debug, Clone)]
pub struct BoyerMoore {
    pattern: Vec<u8>,
    table: BadCharTable,
}

impl BoyerMoore {
    pub fn new(pattern: &[u8]) -> Result<Self, SearchError> {
        Ok(BoyerMoore {
            table: bm_preprocess(pattern)?,
            pattern: pattern.to_vec(),
        })
    }

    pub fn pattern(&self) -> &[u8] {
        &self.pattern
    }

    pub fn table(&self) -> &BadCharTable {
        &self.table
    }

    /// Right-to-left comparison; on a mismatch at `j` the window moves by
    /// `max(1, j - last[text[s + j]])`.
    #[inline]
    pub fn contains(&self, text: &[u8]) -> bool {
        let p = &self.pattern[..];
        let m = p.len();
        let n = text.len();
        if m > n {
            return false;
        }
        let mut s = 0usize;
        while s <= n - m {
            let mut j = m as isize - 1;
            while j >= 0 && p[j as usize] == text[s + j as usize] {
                j -= 1;
            }
            if j < 0 {
                return true;
            }
            let shift = j - self.table.get(text[s + j as usize]);
            s += shift.max(1) as usize;
        }
        false
    }
}

pub fn bm_contains(text: &[u8], pattern: &[u8]) -> Result<bool, SearchError> {
    Ok(BoyerMoore::new(pattern)?.contains(text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeenLabel {
    Seen,
    Unseen,
}

impl SeenLabel {
    pub fn from_count(count: u64, tau: u64) -> Self {
        if count >= tau {
            SeenLabel::Seen
        } else {
            SeenLabel::Unseen
        }
    }
}

impl std::fmt::Display for SeenLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeenLabel::Seen => "SEEN",
            SeenLabel::Unseen => "UNSEEN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchAudit {
    pub doc_id: String,
    pub match_count: u64,
    pub label: SeenLabel,
    #[serde(flatten)]
    pub counters: ScanCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    #[default]
    Indexed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditOptions {
    pub tau: u64,
    /// Skip sentences shorter than this many bytes.
    pub min_sentence_len: Option<usize>,
    /// Strip whitespace and punctuation from sentence edges before matching.
    pub trim_sentences: bool,
    pub strategy: Strategy,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            tau: 100,
            min_sentence_len: None,
            trim_sentences: false,
            strategy: Strategy::Indexed,
        }
    }
}

fn prepare_sentence<'a>(s: &'a str, opts: &AuditOptions) -> Option<&'a str> {
    let s = if opts.trim_sentences {
        s.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
    } else {
        s
    };
    if s.is_empty() || opts.min_sentence_len.is_some_and(|min| s.len() < min) {
        None
    } else {
        Some(s)
    }
}

/// All query sentences of a batch of documents, deduplicated.
#[derive(Debug, Clone)]
pub struct SentenceIndex {
    matchers: Vec<BoyerMoore>,
    // per unique sentence: (document index, multiplicity in that document)
    owners: Vec<Vec<(u32, u32)>>,
    prefilter: Option<AcAutomaton>,
    anchor_groups: Vec<Vec<u32>>,
    strategy: Strategy,
    doc_count: usize,
}

/// Per-worker scratch space for [`SentenceIndex::scan_record`].
#[derive(Debug, Clone, Default)]
pub struct ScanScratch {
    stamps: Vec<u32>,
    stamp: u32,
}

impl SentenceIndex {
    pub fn build(docs: &[Document], opts: &AuditOptions) -> Self {
        let mut ids: HashMap<&str, u32> = HashMap::new();
        let mut matchers = Vec::new();
        let mut owners: Vec<Vec<(u32, u32)>> = Vec::new();
        for (di, doc) in docs.iter().enumerate() {
            for s in doc.sentences.iter().filter_map(|s| prepare_sentence(s, opts)) {
                let id = *ids.entry(s).or_insert_with(|| {
                    matchers.push(BoyerMoore::new(s.as_bytes()).expect("nonempty"));
                    owners.push(Vec::new());
                    (matchers.len() - 1) as u32
                });
                let list = &mut owners[id as usize];
                match list.last_mut() {
                    Some((d, k)) if *d == di as u32 => *k += 1,
                    _ => list.push((di as u32, 1)),
                }
            }
        }
        let (prefilter, anchor_groups) = if opts.strategy == Strategy::Indexed && !matchers.is_empty() {
            let mut anchor_ids: HashMap<&[u8], u32> = HashMap::new();
            let mut anchors: Vec<&[u8]> = Vec::new();
            let mut groups: Vec<Vec<u32>> = Vec::new();
            for (sid, m) in matchers.iter().enumerate() {
                let p = m.pattern();
                let anchor = &p[..p.len().min(ANCHOR_LEN)];
                let aid = *anchor_ids.entry(anchor).or_insert_with(|| {
                    anchors.push(anchor);
                    groups.push(Vec::new());
                    (anchors.len() - 1) as u32
                });
                groups[aid as usize].push(sid as u32);
            }
            let ac = AcAutomaton::build(&anchors).expect("anchors are unique and nonempty");
            (Some(ac), groups)
        } else {
            (None, Vec::new())
        };
        SentenceIndex {
            matchers,
            owners,
            prefilter,
            anchor_groups,
            strategy: opts.strategy,
            doc_count: docs.len(),
        }
    }

    pub fn unique_sentences(&self) -> usize {
        self.matchers.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn scratch(&self) -> ScanScratch {
        ScanScratch {
            stamps: vec![0; self.matchers.len()],
            stamp: 0,
        }
    }

    /// Adds this record's matches to `counts` (one slot per document).
    pub fn scan_record(&self, text: &[u8], counts: &mut [u64], scratch: &mut ScanScratch) {
        let credit = |sid: usize, counts: &mut [u64]| {
            for &(d, k) in &self.owners[sid] {
                counts[d as usize] += k as u64;
            }
        };
        match (&self.prefilter, self.strategy) {
            (Some(ac), Strategy::Indexed) => {
                scratch.stamp = scratch.stamp.wrapping_add(1);
                if scratch.stamp == 0 {
                    scratch.stamps.iter_mut().for_each(|s| *s = 0);
                    scratch.stamp = 1;
                }
                let stamp = scratch.stamp;
                ac.for_each_match(text, |m| {
                    for &sid in &self.anchor_groups[m.pattern as usize] {
                        let sid = sid as usize;
                        if scratch.stamps[sid] == stamp {
                            continue;
                        }
                        scratch.stamps[sid] = stamp;
                        if self.matchers[sid].contains(text) {
                            credit(sid, counts);
                        }
                    }
                });
            }
            _ => {
                for (sid, m) in self.matchers.iter().enumerate() {
                    if m.contains(text) {
                        credit(sid, counts);
                    }
                }
            }
        }
    }

    fn scan_manifest(&self, manifest: &ShardManifest) -> (Vec<u64>, ScanCounters, Vec<ShardError>) {
        let mut counts = vec![0u64; self.doc_count];
        let mut scratch = self.scratch();
        let mut stream = manifest.stream();
        for rec in stream.by_ref() {
            self.scan_record(rec.doc.text.as_bytes(), &mut counts, &mut scratch);
        }
        let (c, e) = stream.into_parts();
        (counts, c, e)
    }

    /// Scans the whole corpus, one worker per shard, summing per-document
    /// counts.
    pub fn scan_corpus(&self, corpus: &ShardManifest) -> (Vec<u64>, ScanCounters, Vec<ShardError>) {
        let parts: Vec<_> = corpus
            .split()
            .par_iter()
            .map(|shard| self.scan_manifest(shard))
            .collect();
        let mut counts = vec![0u64; self.doc_count];
        let mut counters = ScanCounters::default();
        let mut errors = Vec::new();
        for (c, k, e) in parts {
            for (acc, x) in counts.iter_mut().zip(c) {
                *acc += x;
            }
            counters = counters.merge(k);
            errors.extend(e);
        }
        (counts, counters, errors)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchCount {
    pub count: u64,
    pub counters: ScanCounters,
    pub shard_errors: Vec<ShardError>,
}

/// `matches(doc)` against the corpus.
pub fn match_count(
    doc: &Document,
    corpus: &ShardManifest,
    opts: &AuditOptions,
) -> Result<MatchCount, SearchError> {
    if doc.sentences.is_empty() {
        return Err(SearchError::NoSentences(doc.doc_id.clone()));
    }
    let index = SentenceIndex::build(std::slice::from_ref(doc), opts);
    let (counts, counters, shard_errors) = index.scan_corpus(corpus);
    Ok(MatchCount {
        count: counts[0],
        counters,
        shard_errors,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub audits: Vec<MatchAudit>,
    pub counters: ScanCounters,
    pub shard_errors: Vec<ShardError>,
}

impl AuditOutcome {
    pub fn seen_count(&self) -> usize {
        self.audits.iter().filter(|a| a.label == SeenLabel::Seen).count()
    }
}

/// Audits every document in one pass over the corpus. Output is sorted by
/// `doc_id`.
pub fn audit_documents(
    docs: &[Document],
    corpus: &ShardManifest,
    opts: &AuditOptions,
) -> Result<AuditOutcome, SearchError> {
    if opts.tau == 0 {
        return Err(SearchError::InvalidThreshold);
    }
    let index = SentenceIndex::build(docs, opts);
    let (counts, counters, shard_errors) = index.scan_corpus(corpus);
    let mut audits: Vec<MatchAudit> = docs
        .iter()
        .zip(counts)
        .map(|(d, count)| MatchAudit {
            doc_id: d.doc_id.clone(),
            match_count: count,
            label: SeenLabel::from_count(count, opts.tau),
            counters,
        })
        .collect();
    audits.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(AuditOutcome {
        audits,
        counters,
        shard_errors,
    })
}
