use clap::Args;
use serde::Serialize;

use clozekit::corpus::{load_documents, ScanCounters, ShardError, ShardManifest};
use clozekit::nameaudit::{
    apply_exclusion_list, build_automaton, extract_name_candidates, parse_exclusion_list,
    scan_names, CandidateOptions, FrequencyMode, HeuristicNer, NameCandidate, NameLabel,
    ScanOptions,
};
use clozekit::strsearch::{audit_documents, AuditOptions, Strategy};

use super::out_file;
use crate::report::{write_json, write_jsonl, Provenance};
use crate::settings::{CliError, CliResult, Toggle};
use crate::Common;

#[derive(Args, Debug)]
pub struct StringsArgs {
    /// Archive documents (file, shard directory, or plain-text directory).
    #[arg(long)]
    archive: Option<String>,
    /// Training corpus shards.
    #[arg(long)]
    training: Option<String>,
    /// SEEN threshold on the match count.
    #[arg(long)]
    tau_seen: Option<u64>,
    /// Ignore query sentences shorter than this many bytes.
    #[arg(long)]
    min_sentence_len: Option<usize>,
    /// Strip punctuation from sentence edges before matching (on|off).
    #[arg(long)]
    trim_sentences: Option<Toggle>,
    /// indexed | exhaustive (identical results).
    #[arg(long)]
    strategy: Option<String>,
}

#[derive(Serialize)]
struct StringsReport {
    provenance: Provenance,
    documents: usize,
    seen: usize,
    unseen: usize,
    seen_fraction: f64,
    archive_counters: ScanCounters,
    training_counters: ScanCounters,
    shard_errors: Vec<ShardError>,
}

pub(crate) fn manifest(path: &std::path::Path) -> CliResult<ShardManifest> {
    Ok(ShardManifest::discover(path)?)
}

pub fn audit_strings(c: &mut Common, a: StringsArgs) -> CliResult<()> {
    let s = &mut c.settings;
    let archive = s.input("archive", a.archive)?;
    let training = s.input("training", a.training)?;
    let tau = s.value("tau_seen", a.tau_seen, 100u64)?;
    if tau == 0 {
        return Err(CliError::Usage("tau_seen must be positive".into()));
    }
    let min_sentence_len = s.optional("min_sentence_len", a.min_sentence_len)?;
    let trim = s.value("trim_sentences", a.trim_sentences, Toggle(false))?.0;
    let strategy = match s.value("strategy", a.strategy, "indexed".to_string())?.as_str() {
        "indexed" => Strategy::Indexed,
        "exhaustive" => Strategy::Exhaustive,
        other => return Err(CliError::Usage(format!("unknown strategy {other:?}"))),
    };

    let (docs, archive_counters, mut shard_errors) = load_documents(&manifest(&archive)?)?;
    let opts = AuditOptions {
        tau,
        min_sentence_len,
        trim_sentences: trim,
        strategy,
    };
    let outcome = audit_documents(&docs, &manifest(&training)?, &opts)?;
    shard_errors.extend(outcome.shard_errors.iter().cloned());

    let seen = outcome.seen_count();
    let n = outcome.audits.len();
    let provenance = Provenance::new(
        "audit-strings",
        c.seed,
        &c.settings,
        &[("archive", &archive), ("training", &training)],
    )?;
    write_jsonl(&out_file(c, "match_audit.jsonl")?, &outcome.audits)?;
    let report = StringsReport {
        provenance,
        documents: n,
        seen,
        unseen: n - seen,
        seen_fraction: if n == 0 { 0.0 } else { seen as f64 / n as f64 },
        archive_counters,
        training_counters: outcome.counters,
        shard_errors,
    };
    write_json(&out_file(c, "audit_strings.json")?, &report)?;
    println!(
        "SEEN {seen}/{n} ({:.1}%), tries={} excepts={}",
        report.seen_fraction * 100.0,
        outcome.counters.tries,
        outcome.counters.excepts
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct NamesArgs {
    /// Archive documents used for candidate extraction.
    #[arg(long)]
    archive: Option<String>,
    /// Training corpus shards.
    #[arg(long)]
    training: Option<String>,
    /// Newline-separated names to audit instead of extracting candidates.
    #[arg(long)]
    names: Option<String>,
    /// Newline-separated names to drop before the audit.
    #[arg(long)]
    exclusions: Option<String>,
    /// SEEN_IN_O threshold on a name's occurrence count.
    #[arg(long)]
    tau_name: Option<u64>,
    #[arg(long)]
    max_names: Option<usize>,
    /// Exclusive upper bound on archive frequency.
    #[arg(long)]
    max_freq: Option<u64>,
    #[arg(long)]
    min_docs: Option<u64>,
    /// occurrences | documents
    #[arg(long)]
    freq_mode: Option<String>,
    #[arg(long)]
    word_boundary: Option<Toggle>,
    #[arg(long)]
    case_insensitive: Option<Toggle>,
    #[arg(long)]
    snippet_cap: Option<usize>,
}

#[derive(Serialize)]
struct NamesReport {
    provenance: Provenance,
    candidates: usize,
    excluded: usize,
    audited: usize,
    seen_in_o: usize,
    unseen: usize,
    training_counters: ScanCounters,
    shard_errors: Vec<ShardError>,
}

pub fn audit_names(c: &mut Common, a: NamesArgs) -> CliResult<()> {
    let s = &mut c.settings;
    let training = s.input("training", a.training)?;
    let names_file = s.optional_input("names", a.names)?;
    let archive = match names_file {
        Some(_) => None,
        None => Some(s.input("archive", a.archive)?),
    };
    let exclusions_file = s.optional_input("exclusions", a.exclusions)?;
    let tau = s.value("tau_name", a.tau_name, 100u64)?;
    if tau == 0 {
        return Err(CliError::Usage("tau_name must be positive".into()));
    }
    let defaults = CandidateOptions::default();
    let cand_opts = CandidateOptions {
        max_names: s.value("max_names", a.max_names, defaults.max_names)?,
        max_freq: s.value("max_freq", a.max_freq, defaults.max_freq)?,
        min_docs: s.value("min_docs", a.min_docs, defaults.min_docs)?,
        mode: match s.value("freq_mode", a.freq_mode, "occurrences".to_string())?.as_str() {
            "occurrences" => FrequencyMode::Occurrences,
            "documents" => FrequencyMode::Documents,
            other => return Err(CliError::Usage(format!("unknown freq_mode {other:?}"))),
        },
    };
    let scan_defaults = ScanOptions::default();
    let scan_opts = ScanOptions {
        word_boundary: s.value("word_boundary", a.word_boundary, Toggle(true))?.0,
        case_insensitive: s.value("case_insensitive", a.case_insensitive, Toggle(false))?.0,
        snippet_cap: s.value("snippet_cap", a.snippet_cap, scan_defaults.snippet_cap)?,
        tau_seen: tau,
    };

    let mut candidates: Vec<NameCandidate> = Vec::new();
    let names: Vec<String> = match (&names_file, &archive) {
        (Some(path), _) => parse_exclusion_list(&std::fs::read_to_string(path)?),
        (None, Some(archive)) => {
            let (docs, _, _) = load_documents(&manifest(archive)?)?;
            candidates = extract_name_candidates(&docs, &HeuristicNer, cand_opts)?;
            candidates.iter().map(|n| n.name.clone()).collect()
        }
        (None, None) => unreachable!("archive is required without a names file"),
    };
    let exclusions = match &exclusions_file {
        Some(p) => parse_exclusion_list(&std::fs::read_to_string(p)?),
        None => Vec::new(),
    };

    let mut inputs: Vec<(&str, &std::path::Path)> = vec![("training", &training)];
    if let Some(p) = &archive {
        inputs.push(("archive", p));
    }
    if let Some(p) = &names_file {
        inputs.push(("names", p));
    }
    if let Some(p) = &exclusions_file {
        inputs.push(("exclusions", p));
    }
    let provenance = Provenance::new("audit-names", c.seed, &c.settings, &inputs)?;

    let (attestations, excluded, counters, shard_errors) = if names.is_empty() {
        (Vec::new(), 0, ScanCounters::default(), Vec::new())
    } else {
        let scanner = build_automaton(&names, scan_opts.word_boundary, scan_opts.case_insensitive)?;
        let outcome = scan_names(&scanner, &manifest(&training)?, scan_opts);
        let before = outcome.attestations.len();
        let (kept, survivors) = apply_exclusion_list(outcome.attestations, &exclusions);
        (kept, before - survivors, outcome.counters, outcome.shard_errors)
    };
    if archive.is_some() {
        write_jsonl(&out_file(c, "name_candidates.jsonl")?, &candidates)?;
    }
    write_jsonl(&out_file(c, "name_audit.jsonl")?, &attestations)?;
    let seen = attestations.iter().filter(|a| a.label == NameLabel::SeenInO).count();
    let report = NamesReport {
        provenance,
        candidates: names.len(),
        excluded,
        audited: attestations.len(),
        seen_in_o: seen,
        unseen: attestations.len() - seen,
        training_counters: counters,
        shard_errors,
    };
    write_json(&out_file(c, "audit_names.json")?, &report)?;
    println!(
        "names audited {}, SEEN_IN_O {seen}, UNSEEN {} (excluded {excluded})",
        report.audited, report.unseen
    );
    Ok(())
}
