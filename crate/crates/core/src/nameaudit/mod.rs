//! Long-tail person-name candidates and their attestation counts in a
//! training corpus.

mod automaton;
mod ner;

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize, Document, ScanCounters, ShardError, ShardManifest};
use crate::providers::{NerProvider, ProviderError};

pub use automaton::{AcAutomaton, Match, PatternId, StateId};
pub use ner::HeuristicNer;

/// Context kept on each side of a cached snippet, in normalized bytes.
pub const SNIPPET_CONTEXT: usize = 40;

#[derive(Debug, Error)]
pub enum NameAuditError {
    #[error("no patterns given")]
    NoPatterns,
    #[error("empty pattern")]
    EmptyPattern,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameCandidate {
    pub name: String,
    pub corpus_freq_in_archive: u64,
    pub doc_freq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NameLabel {
    SeenInO,
    Unseen,
}

impl NameLabel {
    pub fn from_count(count: u64, tau_seen: u64) -> Self {
        if count >= tau_seen {
            NameLabel::SeenInO
        } else {
            NameLabel::Unseen
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameAttestation {
    pub name: String,
    pub count: u64,
    pub label: NameLabel,
    pub snippets: Vec<String>,
}

/// Which count the `max_freq` long-tail filter applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    #[default]
    Occurrences,
    Documents,
}

#[derive(Debug, Clone, Copy)]
pub struct CandidateOptions {
    pub max_names: usize,
    /// Exclusive upper bound.
    pub max_freq: u64,
    pub min_docs: u64,
    pub mode: FrequencyMode,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions {
            max_names: 10_000,
            max_freq: 51,
            min_docs: 3,
            mode: FrequencyMode::Occurrences,
        }
    }
}

/// Person names from `docs` that are frequent enough to build a timeline
/// around but rare in the archive.
///
/// The `max_names` most frequent names (ties by name) are kept first; the
/// long-tail (`freq < max_freq`) and `doc_freq >= min_docs` filters apply to
/// that list.
pub fn extract_name_candidates(
    docs: &[Document],
    ner: &dyn NerProvider,
    opts: CandidateOptions,
) -> Result<Vec<NameCandidate>, NameAuditError> {
    if opts.max_names == 0 {
        return Err(NameAuditError::InvalidArgument("max_names must be >= 1".into()));
    }
    if docs.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    let spans = ner.persons(&texts)?;
    if spans.len() != docs.len() {
        return Err(ProviderError::Contract(format!(
            "NER returned {} results for {} texts",
            spans.len(),
            docs.len()
        ))
        .into());
    }
    let mut freq: HashMap<String, (u64, u64)> = HashMap::new();
    for names in spans {
        let mut in_doc = BTreeSet::new();
        for name in names {
            let name = normalize(&name);
            if name.is_empty() {
                continue;
            }
            freq.entry(name.clone()).or_default().0 += 1;
            in_doc.insert(name);
        }
        for name in in_doc {
            freq.entry(name).or_default().1 += 1;
        }
    }
    let mut ranked: Vec<NameCandidate> = freq
        .into_iter()
        .map(|(name, (occ, docs))| NameCandidate {
            name,
            corpus_freq_in_archive: occ,
            doc_freq: docs,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.corpus_freq_in_archive
            .cmp(&a.corpus_freq_in_archive)
            .then_with(|| a.name.cmp(&b.name))
    });
    ranked.truncate(opts.max_names);
    Ok(filter_long_tail(ranked, opts))
}

fn filter_long_tail(ranked: Vec<NameCandidate>, opts: CandidateOptions) -> Vec<NameCandidate> {
    ranked
        .into_iter()
        .filter(|c| {
            let f = match opts.mode {
                FrequencyMode::Occurrences => c.corpus_freq_in_archive,
                FrequencyMode::Documents => c.doc_freq,
            };
            f < opts.max_freq && c.doc_freq >= opts.min_docs
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    /// Require non-letter characters (or text edges) around each hit.
    pub word_boundary: bool,
    pub case_insensitive: bool,
    pub snippet_cap: usize,
    pub tau_seen: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            word_boundary: true,
            case_insensitive: false,
            snippet_cap: 5,
            tau_seen: 100,
        }
    }
}

/// An automaton over normalized names plus the matching policy.
#[derive(Debug, Clone)]
pub struct NameScanner {
    automaton: AcAutomaton,
    names: Vec<String>,
    word_boundary: bool,
    case_insensitive: bool,
}

/// Builds the scanner. Names are normalized (and lowercased when
/// `case_insensitive`); duplicates after normalization collapse.
pub fn build_automaton<S: AsRef<str>>(
    names: &[S],
    word_boundary: bool,
    case_insensitive: bool,
) -> Result<NameScanner, NameAuditError> {
    if names.is_empty() {
        return Err(NameAuditError::NoPatterns);
    }
    let mut keys = Vec::with_capacity(names.len());
    for n in names {
        let key = scan_key(n.as_ref(), case_insensitive);
        if key.is_empty() {
            return Err(NameAuditError::EmptyPattern);
        }
        keys.push(key);
    }
    let automaton = AcAutomaton::build(&keys)?;
    let names = automaton
        .patterns()
        .iter()
        .map(|p| String::from_utf8(p.clone()).expect("patterns are utf-8"))
        .collect();
    Ok(NameScanner {
        automaton,
        names,
        word_boundary,
        case_insensitive,
    })
}

fn scan_key(text: &str, case_insensitive: bool) -> String {
    let n = normalize(text);
    if case_insensitive {
        n.to_lowercase()
    } else {
        n
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    counts: Vec<u64>,
    snippets: Vec<Vec<String>>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally {
            counts: vec![0; n],
            snippets: vec![Vec::new(); n],
        }
    }

    fn merge(mut self, other: Tally, cap: usize) -> Tally {
        for (i, c) in other.counts.into_iter().enumerate() {
            self.counts[i] += c;
        }
        for (i, s) in other.snippets.into_iter().enumerate() {
            let room = cap.saturating_sub(self.snippets[i].len());
            self.snippets[i].extend(s.into_iter().take(room));
        }
        self
    }
}

impl NameScanner {
    pub fn automaton(&self) -> &AcAutomaton {
        &self.automaton
    }

    /// Normalized names, indexed by pattern id.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Occurrence counts for one raw text.
    pub fn count_in(&self, text: &str) -> Vec<u64> {
        let mut tally = Tally::new(self.names.len());
        self.scan_text(text, &mut tally, 0);
        tally.counts
    }

    fn scan_text(&self, raw: &str, tally: &mut Tally, cap: usize) {
        let text = scan_key(raw, self.case_insensitive);
        self.automaton.for_each_match(text.as_bytes(), |m| {
            if self.word_boundary && !on_word_boundary(&text, m.start, m.end) {
                return;
            }
            let id = m.pattern as usize;
            tally.counts[id] += 1;
            if tally.snippets[id].len() < cap {
                tally.snippets[id].push(snippet(&text, m.start, m.end));
            }
        });
    }

    fn scan_manifest(&self, manifest: &ShardManifest, cap: usize) -> (Tally, ScanCounters, Vec<ShardError>) {
        let mut tally = Tally::new(self.names.len());
        let mut stream = manifest.stream();
        for rec in stream.by_ref() {
            self.scan_text(&rec.doc.text, &mut tally, cap);
        }
        let (counters, errors) = stream.into_parts();
        (tally, counters, errors)
    }
}

/// Result of a corpus-wide name scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NameScanOutcome {
    pub attestations: Vec<NameAttestation>,
    pub counters: ScanCounters,
    pub shard_errors: Vec<ShardError>,
}

/// Streams the corpus once and counts every (boundary-respecting)
/// occurrence of each name. Shards are scanned in parallel; snippets keep
/// the first `snippet_cap` hits in (shard, record, offset) order.
/// Attestations are sorted by name.
pub fn scan_names(
    scanner: &NameScanner,
    corpus: &ShardManifest,
    opts: ScanOptions,
) -> NameScanOutcome {
    let parts: Vec<(Tally, ScanCounters, Vec<ShardError>)> = corpus
        .split()
        .par_iter()
        .map(|shard| scanner.scan_manifest(shard, opts.snippet_cap))
        .collect();
    let mut tally = Tally::new(scanner.names.len());
    let mut counters = ScanCounters::default();
    let mut shard_errors = Vec::new();
    for (t, c, e) in parts {
        tally = tally.merge(t, opts.snippet_cap);
        counters = counters.merge(c);
        shard_errors.extend(e);
    }
    let mut attestations: Vec<NameAttestation> = scanner
        .names
        .iter()
        .zip(tally.counts)
        .zip(tally.snippets)
        .map(|((name, count), snippets)| NameAttestation {
            name: name.clone(),
            count,
            label: NameLabel::from_count(count, opts.tau_seen),
            snippets,
        })
        .collect();
    attestations.sort_by(|a, b| a.name.cmp(&b.name));
    NameScanOutcome {
        attestations,
        counters,
        shard_errors,
    }
}

/// Drops excluded names (compared after normalization). Returns the
/// survivors and their count.
pub fn apply_exclusion_list<S: AsRef<str>>(
    attestations: Vec<NameAttestation>,
    exclusions: &[S],
) -> (Vec<NameAttestation>, usize) {
    let excluded: BTreeSet<String> = exclusions.iter().map(|e| normalize(e.as_ref())).collect();
    let kept: Vec<NameAttestation> = attestations
        .into_iter()
        .filter(|a| !excluded.contains(&normalize(&a.name)))
        .collect();
    let n = kept.len();
    (kept, n)
}

/// Reads a newline-delimited exclusion list; blank lines are ignored.
pub fn parse_exclusion_list(contents: &str) -> Vec<String> {
    contents
        .lines()
        .map(normalize)
        .filter(|l| !l.is_empty())
        .collect()
}

fn on_word_boundary(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    !before.is_some_and(char::is_alphabetic) && !after.is_some_and(char::is_alphabetic)
}

fn snippet(text: &str, start: usize, end: usize) -> String {
    let mut lo = start.saturating_sub(SNIPPET_CONTEXT);
    while !text.is_char_boundary(lo) {
        lo -= 1;
    }
    let mut hi = (end + SNIPPET_CONTEXT).min(text.len());
    while !text.is_char_boundary(hi) {
        hi += 1;
    }
    text[lo..hi].to_string()
}
