//! Similarity scoring, threshold tuning, accuracy aggregation, and the
//! continuation probe.
//!
//! Similarities are cosines in [-1, 1] internally; [`ScoredPrediction`]
//! and reports carry them on the 0-100 scale ([`REPORT_SCALE`]), which is
//! also the scale of the threshold epsilon.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloze::TemplateId;
use crate::corpus::Document;
use crate::providers::{
    EmbeddingRequest, Embedder, GenerationRequest, Generator, ProviderError,
};
use crate::stats;
use crate::strsearch::SeenLabel;
use crate::timeline::EventType;

pub const REPORT_SCALE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("provider failure on {instance_id}: {source}")]
    Provider {
        instance_id: String,
        source: ProviderError,
    },
}

/// `u . v / (|u| |v|)`, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, ScoringError> {
    if u.len() != v.len() {
        return Err(ScoringError::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(ScoringError::UndefinedSimilarity("zero vector".into()));
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// TF-IDF vectors fitted on the pair alone: raw counts times
/// `ln(3 / (1 + df)) + 1`, L2-normalized, over the sorted union vocabulary.
pub fn pairwise_tfidf(a: &str, b: &str) -> Result<(Vec<f64>, Vec<f64>), ScoringError> {
    let (ta, tb) = (tokenize(a), tokenize(b));
    if ta.is_empty() || tb.is_empty() {
        return Err(ScoringError::UndefinedSimilarity(
            "text has no terms after tokenization".into(),
        ));
    }
    let mut counts: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for t in &ta {
        counts.entry(t).or_default().0 += 1.0;
    }
    for t in &tb {
        counts.entry(t).or_default().1 += 1.0;
    }
    let n = 2.0f64;
    let (mut va, mut vb) = (Vec::with_capacity(counts.len()), Vec::with_capacity(counts.len()));
    for &(ca, cb) in counts.values() {
        let df = f64::from(u8::from(ca > 0.0) + u8::from(cb > 0.0));
        let idf = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
        va.push(ca * idf);
        vb.push(cb * idf);
    }
    for v in [&mut va, &mut vb] {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok((va, vb))
}

pub fn tfidf_similarity(a: &str, b: &str) -> Result<f64, ScoringError> {
    let (u, v) = pairwise_tfidf(a, b)?;
    cosine(&u, &v)
}

/// A model reconstruction; `text` is `None` when the output was unparseable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub instance_id: String,
    pub prediction: Option<String>,
    /// Report scale; absent for unparseable or degenerate outputs.
    pub similarity: Option<f64>,
    pub similar: bool,
}

/// `similarity >= epsilon`, both on the report scale.
pub fn is_similar(similarity: Option<f64>, epsilon: f64) -> bool {
    similarity.is_some_and(|s| s >= epsilon)
}

/// Scores each prediction against its gold text with the embedder
/// (narrative task prefix) and labels it under `epsilon` (report scale).
pub fn score_predictions(
    preds: &[Prediction],
    golds: &[String],
    embedder: &dyn Embedder,
    epsilon: f64,
) -> Result<Vec<ScoredPrediction>, ScoringError> {
    if preds.len() != golds.len() {
        return Err(ScoringError::InvalidArgument(format!(
            "{} predictions for {} gold texts",
            preds.len(),
            golds.len()
        )));
    }
    preds
        .par_iter()
        .zip(golds.par_iter())
        .map(|(p, gold)| {
            let similarity = match p.text.as_deref().map(str::trim) {
                Some(text) if !text.is_empty() => {
                    let req = EmbeddingRequest::narrative(vec![text.to_string(), gold.clone()]);
                    let vecs = embedder.embed(&req).map_err(|source| ScoringError::Provider {
                        instance_id: p.instance_id.clone(),
                        source,
                    })?;
                    if vecs.len() != 2 {
                        return Err(ScoringError::Provider {
                            instance_id: p.instance_id.clone(),
                            source: ProviderError::Contract(format!(
                                "{} vectors for 2 texts",
                                vecs.len()
                            )),
                        });
                    }
                    cosine(&vecs[0], &vecs[1]).ok().map(|c| c * REPORT_SCALE)
                }
                _ => None,
            };
            Ok(ScoredPrediction {
                instance_id: p.instance_id.clone(),
                prediction: p.text.clone(),
                similarity,
                similar: is_similar(similarity, epsilon),
            })
        })
        .collect()
}

/// Relabels already scored predictions under a new threshold.
pub fn relabel(scored: &mut [ScoredPrediction], epsilon: f64) {
    for s in scored {
        s.similar = is_similar(s.similarity, epsilon);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub epsilon_star: f64,
    pub macro_f1: f64,
    pub sweep: Vec<(f64, f64)>,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Mean of the per-class F1 scores of "similar" (label 1) and "different".
pub fn macro_f1(predicted: &[bool], labels: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &l) in predicted.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    (f1(tp, fp, fn_) + f1(tn, fn_, fp)) / 2.0
}

/// Sweeps midpoints between consecutive distinct scores plus one sentinel
/// below the minimum and one above the maximum; a score is "similar" when
/// `score >= candidate`. Returns the smallest candidate with maximal
/// macro-F1.
pub fn tune_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdResult, ScoringError> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(ScoringError::InvalidArgument(
            "scores and labels must be nonempty and of equal length".into(),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ScoringError::InvalidArgument("non-finite score".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(ScoringError::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();

    let mut candidates = vec![sorted[0] - 1.0];
    for w in sorted.windows(2) {
        if w[1] > w[0] {
            candidates.push(w[0] + (w[1] - w[0]) / 2.0);
        }
    }
    candidates.push(sorted[sorted.len() - 1] + 1.0);

    // walk candidates upwards; everything below the candidate is "different"
    let total_neg = labels.len() - positives;
    let (mut below_pos, mut below_neg, mut k) = (0usize, 0usize, 0usize);
    let mut sweep = Vec::with_capacity(candidates.len());
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for &c in &candidates {
        while k < sorted.len() && sorted[k] < c {
            if labels[order[k]] {
                below_pos += 1;
            } else {
                below_neg += 1;
            }
            k += 1;
        }
        let tp = positives - below_pos;
        let fp = total_neg - below_neg;
        let score = (f1(tp, fp, below_pos) + f1(below_neg, below_pos, fp)) / 2.0;
        sweep.push((c, score));
        if score > best.0 {
            best = (score, c);
        }
    }
    Ok(ThresholdResult {
        epsilon_star: best.1,
        macro_f1: best.0,
        sweep,
    })
}

/// Fraction of predictions labelled similar.
pub fn accuracy(scored: &[ScoredPrediction]) -> Result<f64, ScoringError> {
    if scored.is_empty() {
        return Err(ScoringError::InvalidArgument("no scored predictions".into()));
    }
    Ok(scored.iter().filter(|s| s.similar).count() as f64 / scored.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub window: usize,
    pub window_count: usize,
    pub context: usize,
    pub max_new_tokens: u32,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            window: 5,
            window_count: 5,
            context: 20,
            max_new_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub doc_id: String,
    pub label: SeenLabel,
    pub position_sims: Vec<f64>,
    pub mean_sim: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSkip {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub results: Vec<ProbeResult>,
    pub skipped: Vec<ProbeSkip>,
}

/// Plain continuation prompt: the context sentences followed by the
/// model's earlier continuations, space-joined.
pub fn probe_prompt(context: &[String], prior: &[String]) -> String {
    context
        .iter()
        .chain(prior)
        .map(|s| s.trim())
        .collect::<Vec<_>>()
        .join(" ")
}

fn probe_one(
    doc: &Document,
    label: SeenLabel,
    generator: &dyn Generator,
    opts: &ProbeOptions,
) -> Result<Result<ProbeResult, ProbeSkip>, ScoringError> {
    let needed = opts.context + opts.window * opts.window_count;
    if doc.sentences.len() < needed {
        return Ok(Err(ProbeSkip {
            doc_id: doc.doc_id.clone(),
            reason: format!("{} sentences, need {needed}", doc.sentences.len()),
        }));
    }
    let context = &doc.sentences[..opts.context];
    let mut prior: Vec<String> = Vec::with_capacity(opts.window_count);
    let mut sims = Vec::with_capacity(opts.window_count);
    for i in 0..opts.window_count {
        let start = opts.context + i * opts.window;
        let gold = doc.sentences[start..start + opts.window].join(" ");
        let mut req = GenerationRequest::new(None, probe_prompt(context, &prior));
        req.max_new_tokens = opts.max_new_tokens;
        let reply = generator.generate(&req).map_err(|source| ScoringError::Provider {
            instance_id: format!("{}#p{}", doc.doc_id, i + 1),
            source,
        })?;
        sims.push(tfidf_similarity(&gold, &reply.text).unwrap_or(0.0));
        prior.push(reply.text);
    }
    let mean_sim = sims.iter().sum::<f64>() / sims.len() as f64;
    Ok(Ok(ProbeResult {
        doc_id: doc.doc_id.clone(),
        label,
        position_sims: sims,
        mean_sim,
    }))
}

/// Generates `window_count` successive continuations per document, each
/// conditioned on the context and the model's own earlier continuations,
/// and scores each against the gold window with pairwise TF-IDF cosine.
/// Empty continuations score 0. Documents that are too short are skipped.
pub fn run_probe(
    docs: &[(Document, SeenLabel)],
    generator: &dyn Generator,
    opts: &ProbeOptions,
) -> Result<ProbeOutcome, ScoringError> {
    if opts.window == 0 || opts.window_count == 0 {
        return Err(ScoringError::InvalidArgument(
            "window and window_count must be >= 1".into(),
        ));
    }
    let per_doc: Vec<_> = docs
        .par_iter()
        .map(|(doc, label)| probe_one(doc, *label, generator, opts))
        .collect::<Result<_, _>>()?;
    let mut out = ProbeOutcome::default();
    for r in per_doc {
        match r {
            Ok(res) => out.results.push(res),
            Err(skip) => out.skipped.push(skip),
        }
    }
    Ok(out)
}

/// Draws up to `per_label` SEEN and `per_label` UNSEEN ids, seeded.
/// Inputs are sorted before shuffling so the draw depends only on the set.
pub fn sample_balanced(
    labelled: &[(String, SeenLabel)],
    per_label: usize,
    seed: u64,
) -> Vec<(String, SeenLabel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for label in [SeenLabel::Seen, SeenLabel::Unseen] {
        let mut ids: Vec<&String> = labelled
            .iter()
            .filter(|(_, l)| *l == label)
            .map(|(id, _)| id)
            .collect();
        ids.sort();
        ids.dedup();
        ids.shuffle(&mut rng);
        out.extend(ids.into_iter().take(per_label).map(|id| (id.clone(), label)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionBucket {
    Begin,
    Middle,
    End,
}

impl PositionBucket {
    /// First event is `Begin`, last is `End`, the rest `Middle`.
    pub fn of(position: usize, timeline_length: usize) -> Self {
        if position <= 1 {
            PositionBucket::Begin
        } else if position >= timeline_length {
            PositionBucket::End
        } else {
            PositionBucket::Middle
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PositionBucket::Begin => "begin",
            PositionBucket::Middle => "middle",
            PositionBucket::End => "end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub event_type: EventType,
    pub event_word_count: usize,
    pub timeline_length: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub group: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub covariate: String,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub n: usize,
    pub accuracy: f64,
    pub by_event_type: Vec<GroupAccuracy>,
    pub event_length_edges: [f64; 3],
    pub by_event_length: Vec<GroupAccuracy>,
    pub timeline_length_edges: [f64; 3],
    pub by_timeline_length: Vec<GroupAccuracy>,
    pub by_position: Vec<GroupAccuracy>,
    pub correlations: Vec<Correlation>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quartile_edges(values: &[f64]) -> [f64; 3] {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    [quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75)]
}

fn quartile_of(x: f64, edges: &[f64; 3]) -> usize {
    edges.iter().take_while(|&&e| x > e).count()
}

fn grouped<K: Ord + Clone>(
    keys: impl Iterator<Item = K>,
    outcomes: &[bool],
    name: impl Fn(&K) -> String,
) -> Vec<GroupAccuracy> {
    let mut groups: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    for (k, &ok) in keys.zip(outcomes) {
        let g = groups.entry(k).or_default();
        g.0 += 1;
        g.1 += usize::from(ok);
    }
    groups
        .into_iter()
        .map(|(k, (n, correct))| GroupAccuracy {
            group: name(&k),
            n,
            correct,
            accuracy: correct as f64 / n as f64,
        })
        .collect()
}

/// Accuracy by event type, event-length quartile, timeline-length
/// quartile and position bucket, plus Spearman correlations of each
/// covariate with correctness. Quartile edges come from the sample.
pub fn breakdown_report(
    scored: &[ScoredPrediction],
    metadata: &[InstanceMeta],
) -> Result<BreakdownReport, ScoringError> {
    if scored.is_empty() || scored.len() != metadata.len() {
        return Err(ScoringError::InvalidArgument(
            "need one metadata entry per scored prediction".into(),
        ));
    }
    let outcomes: Vec<bool> = scored.iter().map(|s| s.similar).collect();
    let lengths: Vec<f64> = metadata.iter().map(|m| m.event_word_count as f64).collect();
    let tl: Vec<f64> = metadata.iter().map(|m| m.timeline_length as f64).collect();
    let le = quartile_edges(&lengths);
    let te = quartile_edges(&tl);
    let q = |k: &usize| format!("Q{}", k + 1);

    let y: Vec<f64> = outcomes.iter().map(|&o| f64::from(u8::from(o))).collect();
    let rel_pos: Vec<f64> = metadata
        .iter()
        .map(|m| m.position as f64 / m.timeline_length.max(1) as f64)
        .collect();
    let correlations = [
        ("event_word_count", &lengths),
        ("timeline_length", &tl),
        ("relative_position", &rel_pos),
    ]
    .into_iter()
    .map(|(name, x)| {
        let r = stats::spearman_rho(x, &y).ok();
        Correlation {
            covariate: name.to_string(),
            rho: r.map(|r| r.rho),
            p_value: r.map(|r| r.p_value),
        }
    })
    .collect();

    Ok(BreakdownReport {
        n: scored.len(),
        accuracy: accuracy(scored)?,
        by_event_type: grouped(metadata.iter().map(|m| m.event_type), &outcomes, |t| {
            t.as_str().to_string()
        }),
        event_length_edges: le,
        by_event_length: grouped(lengths.iter().map(|&x| quartile_of(x, &le)), &outcomes, q),
        timeline_length_edges: te,
        by_timeline_length: grouped(tl.iter().map(|&x| quartile_of(x, &te)), &outcomes, q),
        by_position: grouped(
            metadata
                .iter()
                .map(|m| PositionBucket::of(m.position, m.timeline_length)),
            &outcomes,
            |b| b.as_str().to_string(),
        ),
        correlations,
    })
}

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

pub fn render_breakdown_text(report: &BreakdownReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "overall  n={}  acc={}", report.n, pct(report.accuracy));
    let sections = [
        ("event type", &report.by_event_type),
        ("event length", &report.by_event_length),
        ("timeline length", &report.by_timeline_length),
        ("position", &report.by_position),
    ];
    for (title, groups) in sections {
        let _ = writeln!(out, "\n{title}");
        for g in groups {
            let _ = writeln!(out, "  {:<16} n={:<6} acc={}", g.group, g.n, pct(g.accuracy));
        }
    }
    let fmt_edges = |e: &[f64; 3]| format!("{} / {} / {}", e[0], e[1], e[2]);
    let _ = writeln!(out, "\nevent length quartile edges: {}", fmt_edges(&report.event_length_edges));
    let _ = writeln!(
        out,
        "timeline length quartile edges: {}",
        fmt_edges(&report.timeline_length_edges)
    );
    let _ = writeln!(out, "\nspearman");
    for c in &report.correlations {
        match (c.rho, c.p_value) {
            (Some(r), Some(p)) => {
                let _ = writeln!(out, "  {:<18} rho={r:.3} p={p:.3e}", c.covariate);
            }
            _ => {
                let _ = writeln!(out, "  {:<18} undefined", c.covariate);
            }
        }
    }
    out
}

/// One cell of the models x templates x hint grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub model: String,
    pub template: TemplateId,
    pub hint: bool,
    pub n: usize,
    pub accuracy: f64,
}

/// Rows are (model, hint) pairs, columns templates in canonical order;
/// accuracies in percent with one decimal.
pub fn render_accuracy_grid(cells: &[AccuracyCell]) -> String {
    let mut templates: Vec<TemplateId> = cells.iter().map(|c| c.template).collect();
    templates.sort();
    templates.dedup();
    let mut rows: Vec<(&str, bool)> = cells.iter().map(|c| (c.model.as_str(), c.hint)).collect();
    rows.sort();
    rows.dedup();
    let index: HashMap<(&str, bool, TemplateId), f64> = cells
        .iter()
        .map(|c| ((c.model.as_str(), c.hint, c.template), c.accuracy))
        .collect();

    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:<7}", "model", "hint");
    for t in &templates {
        let _ = write!(out, "  {:>6}", t.short_label());
    }
    out.push('\n');
    for (model, hint) in rows {
        let _ = write!(out, "{model:<width$}  {:<7}", if hint { "hint" } else { "no-hint" });
        for t in &templates {
            match index.get(&(model, hint, *t)) {
                Some(a) => {
                    let _ = write!(out, "  {:>6}", pct(*a));
                }
                None => {
                    let _ = write!(out, "  {:>6}", "");
                }
            }
        }
        out.push('\n');
    }
    out
}
