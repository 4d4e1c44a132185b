//! Corpus contamination audits and narrative-cloze evaluation.
//!
//! The crate is organised around the stages of an audit-then-evaluate
//! pipeline:
//!
//! * [`corpus`] streams sharded JSONL corpora and segments documents.
//! * [`strsearch`] runs the exhaustive sentence-level Boyer–Moore audit.
//! * [`nameaudit`] extracts long-tail person names and counts their
//!   attestations with an Aho–Corasick automaton.
//! * [`timeline`] holds ground-truth character timelines and the
//!   extraction prompt.
//! * [`cloze`] masks timelines and renders evaluation prompts.
//! * [`providers`] defines the generation/embedding/NER service contracts.
//! * [`scoring`] computes similarities, tunes thresholds and runs the
//!   continuation probe.
//! * [`stats`] is the hypothesis-testing battery used in reports.

pub mod cloze;
pub mod corpus;
pub mod error;
pub mod nameaudit;
pub mod providers;
pub mod scoring;
pub mod stats;
pub mod strsearch;
pub mod timeline;

pub use cloze::{ClozeInstance, MaskKind, MaskSpec, PromptEnvelope, PromptTemplate};
pub use corpus::{Document, RecordFormat, ScanCounters, ShardManifest};
pub use error::{Error, Result};
pub use nameaudit::{AcAutomaton, NameAttestation, NameCandidate, NameLabel};
pub use scoring::{ProbeResult, ScoredPrediction, ThresholdResult};
pub use stats::{EffectSize, IntervalEstimate, Sidedness, TestResult};
pub use strsearch::{BadCharTable, MatchAudit, SeenLabel};
pub use timeline::{Event, EventType, Timeline};

/// Toolkit version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
