use std::collections::{BTreeMap, HashMap};

use clap::Args;
use serde::{Deserialize, Serialize};

use clozekit::corpus::load_documents;
use clozekit::providers::{Generator, PrefixOracle};
use clozekit::scoring::{
    run_probe, sample_balanced, score_predictions, tune_threshold as tune, Prediction, ProbeOptions,
    ProbeResult, ProbeSkip, ScoringError, ThresholdResult, REPORT_SCALE,
};
use clozekit::stats::{
    compare_groups, paired_suite, render_group_report, BootstrapOptions, CiMethod, GroupReport,
    GroupReportOptions, PairedSuite, Sidedness,
};
use clozekit::{MatchAudit, SeenLabel};

use super::audit::manifest;
use super::out_file;
use crate::providers::{embedder, generator, provider_error};
use crate::report::{derive_seed, read_jsonl, write_json, write_jsonl, Provenance};
use crate::settings::{CliError, CliResult};
use crate::{Common, HttpArgs};

fn scoring_err(e: ScoringError) -> CliError {
    match e {
        ScoringError::Provider { instance_id, source } => {
            CliError::Provider(format!("{instance_id}: {}", provider_error(source)))
        }
        other => CliError::Failed(other.into()),
    }
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    /// JSON lines of {score, label} or {prediction, gold, label}.
    #[arg(long)]
    validation: Option<String>,
    /// Embedding provider, needed when rows carry text instead of scores.
    #[arg(long)]
    embedder: Option<String>,
    #[command(flatten)]
    http: HttpArgs,
}

#[derive(Deserialize)]
struct ValidationRow {
    #[serde(default)]
    score: Option<f64>,
    #[serde(default)]
    prediction: Option<String>,
    #[serde(default)]
    gold: Option<String>,
    label: bool,
}

#[derive(Serialize)]
struct TuneReport {
    provenance: Provenance,
    n: usize,
    positives: usize,
    #[serde(flatten)]
    result: ThresholdResult,
}

pub fn tune_threshold(c: &mut Common, a: TuneArgs) -> CliResult<()> {
    let s = &mut c.settings;
    let path = s.input("validation", a.validation)?;
    let emb_id: Option<String> = s.optional("embedder", a.embedder)?;
    let http = a.http.resolve(s)?;
    let rows: Vec<ValidationRow> = read_jsonl(&path)?;
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{} has no rows", path.display())));
    }
    let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();

    let scores: Vec<f64> = if rows.iter().all(|r| r.score.is_some()) {
        rows.iter().filter_map(|r| r.score).collect()
    } else {
        let Some(emb_id) = emb_id else {
            return Err(CliError::Usage(
                "rows without a score need --embedder".into(),
            ));
        };
        let emb = embedder(&emb_id, &http)?;
        let mut preds = Vec::with_capacity(rows.len());
        let mut golds = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let gold = r.gold.clone().ok_or_else(|| {
                CliError::Usage(format!("row {}: needs score or prediction and gold", i + 1))
            })?;
            preds.push(Prediction {
                instance_id: format!("row{}", i + 1),
                text: r.prediction.clone(),
            });
            golds.push(gold);
        }
        score_predictions(&preds, &golds, emb.as_ref(), 0.0)
            .map_err(scoring_err)?
            .into_iter()
            // a missing prediction takes the lowest possible cosine
            .map(|p| p.similarity.unwrap_or(-REPORT_SCALE))
            .collect()
    };
    let result = tune(&scores, &labels).map_err(scoring_err)?;
    let provenance = Provenance::new("tune-threshold", c.seed, &c.settings, &[("validation", &path)])?;
    println!(
        "epsilon* = {:.4}, macro-F1 = {:.4}",
        result.epsilon_star, result.macro_f1
    );
    write_json(
        &out_file(c, "threshold.json")?,
        &TuneReport {
            provenance,
            n: labels.len(),
            positives: labels.iter().filter(|&&l| l).count(),
            result,
        },
    )?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// Archive shards.
    #[arg(long)]
    archive: Option<String>,
    /// match_audit.jsonl from audit-strings.
    #[arg(long)]
    audit: Option<String>,
    /// Generation provider id (mock-oracle replays the documents).
    #[arg(long)]
    generator: Option<String>,
    /// Documents drawn per label.
    #[arg(long)]
    per_label: Option<usize>,
    /// Context sentences.
    #[arg(long)]
    context: Option<usize>,
    /// Sentences per continuation window.
    #[arg(long)]
    window: Option<usize>,
    /// Number of successive windows.
    #[arg(long)]
    windows: Option<usize>,
    #[arg(long)]
    max_new_tokens: Option<u32>,
    #[command(flatten)]
    http: HttpArgs,
}

#[derive(Serialize)]
struct ProbeReport {
    provenance: Provenance,
    model: String,
    options: ProbeOptions,
    sampled: usize,
    scored_seen: usize,
    scored_unseen: usize,
    skipped: Vec<ProbeSkip>,
}

pub fn probe(c: &mut Common, a: ProbeArgs) -> CliResult<()> {
    let s = &mut c.settings;
    let archive = s.input("archive", a.archive)?;
    let audit_path = s.input("audit", a.audit)?;
    let gen_id: String = s.required("generator", a.generator)?;
    let per_label = s.value("per_label", a.per_label, 500usize)?;
    let defaults = ProbeOptions::default();
    let opts = ProbeOptions {
        context: s.value("context", a.context, defaults.context)?,
        window: s.value("window", a.window, defaults.window)?,
        window_count: s.value("windows", a.windows, defaults.window_count)?,
        max_new_tokens: s.value("max_new_tokens", a.max_new_tokens, defaults.max_new_tokens)?,
    };
    if opts.window == 0 || opts.window_count == 0 {
        return Err(CliError::Usage("window and windows must be >= 1".into()));
    }
    let http = a.http.resolve(s)?;

    let audits: Vec<MatchAudit> = read_jsonl(&audit_path)?;
    let labelled: Vec<(String, SeenLabel)> =
        audits.iter().map(|m| (m.doc_id.clone(), m.label)).collect();
    let sample = sample_balanced(&labelled, per_label, derive_seed(c.seed, "probe.sample"));

    let (docs, _, _) = load_documents(&manifest(&archive)?)?;
    let by_id: HashMap<&str, usize> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.doc_id.as_str(), i))
        .collect();
    let mut selected = Vec::with_capacity(sample.len());
    for (id, label) in &sample {
        let Some(&i) = by_id.get(id.as_str()) else {
            return Err(CliError::Failed(anyhow::anyhow!(
                "audited document {id} is not in the archive"
            )));
        };
        selected.push((docs[i].clone(), *label));
    }
    selected.sort_by(|x, y| x.0.doc_id.cmp(&y.0.doc_id));

    let gen: Box<dyn Generator> = if gen_id == "mock-oracle" {
        let sentences = selected.iter().map(|(d, _)| d.sentences.clone()).collect();
        Box::new(PrefixOracle::new(sentences, opts.window))
    } else {
        generator(&gen_id, &http)?
    };
    let outcome = run_probe(&selected, gen.as_ref(), &opts).map_err(scoring_err)?;

    let provenance = Provenance::new(
        "probe",
        c.seed,
        &c.settings,
        &[("archive", &archive), ("audit", &audit_path)],
    )?;
    write_jsonl(&out_file(c, "probe.jsonl")?, &outcome.results)?;
    let count = |l| outcome.results.iter().filter(|r| r.label == l).count();
    let report = ProbeReport {
        provenance,
        model: gen.model_id().to_string(),
        options: opts,
        sampled: selected.len(),
        scored_seen: count(SeenLabel::Seen),
        scored_unseen: count(SeenLabel::Unseen),
        skipped: outcome.skipped,
    };
    write_json(&out_file(c, "probe_report.json")?, &report)?;
    println!(
        "probed {} SEEN and {} UNSEEN documents, {} skipped",
        report.scored_seen,
        report.scored_unseen,
        report.skipped.len()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// probe.jsonl from the probe command.
    #[arg(long)]
    probe: Option<String>,
    /// JSON lines of {label, a, b} paired scores.
    #[arg(long)]
    paired: Option<String>,
    #[arg(long)]
    permutation_iterations: Option<usize>,
    #[arg(long)]
    bootstrap_iterations: Option<usize>,
    /// bca | percentile
    #[arg(long)]
    ci_method: Option<String>,
    #[arg(long)]
    ci_level: Option<f64>,
    /// Alternative for the paired tests: greater | less | two_sided.
    #[arg(long)]
    paired_side: Option<String>,
}

#[derive(Deserialize)]
struct PairedRow {
    label: String,
    a: f64,
    b: f64,
}

#[derive(Serialize)]
struct PairedEntry {
    label: String,
    #[serde(flatten)]
    suite: PairedSuite,
}

#[derive(Serialize)]
struct StatsReport {
    provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    groups: Option<GroupReport>,
    paired: Vec<PairedEntry>,
}

fn fmt_test(t: &Option<clozekit::TestResult>) -> String {
    t.as_ref()
        .map_or("-".to_string(), |t| format!("{:.4}", t.p_value))
}

pub fn stats_report(c: &mut Common, a: StatsArgs) -> CliResult<()> {
    let s = &mut c.settings;
    let probe_path = s.optional_input("probe", a.probe)?;
    let paired_path = s.optional_input("paired", a.paired)?;
    if probe_path.is_none() && paired_path.is_none() {
        return Err(CliError::Usage("need --probe, --paired or both".into()));
    }
    let permutation_iterations =
        s.value("permutation_iterations", a.permutation_iterations, 10_000usize)?;
    let iterations = s.value("bootstrap_iterations", a.bootstrap_iterations, 10_000usize)?;
    let method = match s.value("ci_method", a.ci_method, "bca".to_string())?.as_str() {
        "bca" => CiMethod::Bca,
        "percentile" => CiMethod::Percentile,
        other => return Err(CliError::Usage(format!("unknown ci_method {other:?}"))),
    };
    let level = s.value("ci_level", a.ci_level, 0.95f64)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Usage("ci_level must be in (0, 1)".into()));
    }
    let side: Sidedness = s
        .value("paired_side", a.paired_side, "greater".to_string())?
        .parse()
        .map_err(CliError::Usage)?;
    let bootstrap = BootstrapOptions {
        level,
        method,
        iterations,
        seed: derive_seed(c.seed, "stats.bootstrap"),
    };

    let mut text = String::new();
    let groups = match &probe_path {
        Some(p) => {
            let results: Vec<ProbeResult> = read_jsonl(p)?;
            let width = results.iter().map(|r| r.position_sims.len()).max().unwrap_or(0);
            let mut metrics: Vec<(String, Vec<f64>, Vec<f64>)> = (0..width)
                .map(|j| (format!("p{}", j + 1), Vec::new(), Vec::new()))
                .collect();
            metrics.push(("mean_sim".to_string(), Vec::new(), Vec::new()));
            for r in &results {
                let values = r.position_sims.iter().copied().chain([r.mean_sim]);
                let slots = (0..r.position_sims.len()).chain([width]);
                for (j, v) in slots.zip(values) {
                    match r.label {
                        SeenLabel::Seen => metrics[j].1.push(v),
                        SeenLabel::Unseen => metrics[j].2.push(v),
                    }
                }
            }
            let opts = GroupReportOptions {
                permutation_iterations,
                bootstrap,
            };
            let report = compare_groups(&metrics, &opts)
                .map_err(|e| CliError::Failed(anyhow::anyhow!("probe comparison: {e}")))?;
            text.push_str("SEEN (a) vs UNSEEN (b), one-sided a > b; * Holm-adjusted\n");
            text.push_str(&render_group_report(&report));
            Some(report)
        }
        None => None,
    };

    let mut paired = Vec::new();
    if let Some(p) = &paired_path {
        let mut by_label: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for row in read_jsonl::<PairedRow>(p)? {
            let e = by_label.entry(row.label).or_default();
            e.0.push(row.a);
            e.1.push(row.b);
        }
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&format!(
            "{:<24} {:>5} {:>6} {:>9} {:>8} {:>10} {:>10} {:>10}\n",
            "paired", "n", "zeros", "mean_diff", "pos_frac", "p_t", "p_wilcoxon", "p_sign"
        ));
        for (label, (a, b)) in by_label {
            let suite = paired_suite(&a, &b, side, &bootstrap)
                .map_err(|e| CliError::Failed(anyhow::anyhow!("paired {label}: {e}")))?;
            text.push_str(&format!(
                "{:<24} {:>5} {:>6} {:>9.4} {:>8.3} {:>10} {:>10} {:>10}\n",
                label,
                suite.n,
                suite.zero_differences,
                suite.mean_diff,
                suite.positive_fraction,
                fmt_test(&suite.paired_t),
                fmt_test(&suite.wilcoxon),
                fmt_test(&suite.sign_test),
            ));
            paired.push(PairedEntry { label, suite });
        }
    }

    let mut inputs = Vec::new();
    if let Some(p) = &probe_path {
        inputs.push(("probe", p.as_path()));
    }
    if let Some(p) = &paired_path {
        inputs.push(("paired", p.as_path()));
    }
    let provenance = Provenance::new("stats-report", c.seed, &c.settings, &inputs)?;
    write_json(
        &out_file(c, "stats_report.json")?,
        &StatsReport {
            provenance,
            groups,
            paired,
        },
    )?;
    std::fs::write(out_file(c, "stats_report.txt")?, &text)?;
    print!("{text}");
    Ok(())
}
