use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use clozekit::cloze::{
    full_sweep, ngram_windows, parse_model_output, partial_sweep, render_cloze_prompt,
    ClozeError, ClozeInstance, ClozeRecord, PromptTemplate, SourceMeta, TemplateId,
};
use clozekit::providers::{GenerationRequest, Generator};
use clozekit::scoring::{
    breakdown_report, render_accuracy_grid, render_breakdown_text, score_predictions,
    AccuracyCell, BreakdownReport, InstanceMeta, Prediction, ScoringError,
};
use clozekit::timeline::{parse_timeline_csv, Timeline};

use super::out_file;
use crate::providers::{embedder, generator, provider_error};
use crate::report::{read_jsonl, write_json, write_jsonl, Provenance};
use crate::settings::{CliError, CliResult, Toggle};
use crate::{Common, HttpArgs};

#[derive(Args, Debug)]
pub struct MakeArgs {
    /// Timeline CSV file or directory of CSV files.
    #[arg(long)]
    timelines: Option<String>,
    /// full | partial | ngram
    #[arg(long)]
    mode: Option<String>,
    /// Window size for ngram mode.
    #[arg(long)]
    k: Option<usize>,
    /// Template used for the stored prompt.
    #[arg(long)]
    template: Option<String>,
    /// Annotate masked lines with the event type (on|off).
    #[arg(long)]
    hint: Option<Toggle>,
    /// JSON lines of {character, title, collection_title, pub_year} for null_shot.
    #[arg(long)]
    source_meta: Option<String>,
}

#[derive(Deserialize)]
struct SourceMetaRow {
    character: String,
    title: String,
    collection_title: String,
    pub_year: serde_json::Value,
}

#[derive(Serialize)]
struct MakeReport {
    provenance: Provenance,
    timelines: usize,
    instances: usize,
    mode: String,
    template: TemplateId,
    hint: bool,
    warnings: Vec<String>,
}

fn timeline_files(path: &Path) -> CliResult<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn cloze_err(e: ClozeError) -> CliError {
    match e {
        ClozeError::MissingMetadata(_) => CliError::Usage(e.to_string()),
        other => CliError::Failed(other.into()),
    }
}

pub fn make_cloze(c: &mut Common, a: MakeArgs) -> CliResult<()> {
    let s = &mut c.settings;
    let path = s.input("timelines", a.timelines)?;
    let mode = s.value("mode", a.mode, "full".to_string())?;
    let k = s.value("k", a.k, 2usize)?;
    let template: TemplateId = s
        .value("template", a.template, "base".to_string())?
        .parse()
        .map_err(CliError::Usage)?;
    let hint = s.value("hint", a.hint, Toggle(false))?.0;
    let meta_path = s.optional_input("source_meta", a.source_meta)?;

    let mut meta: BTreeMap<String, SourceMeta> = BTreeMap::new();
    if let Some(p) = &meta_path {
        for row in read_jsonl::<SourceMetaRow>(p)? {
            let pub_year = match row.pub_year {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            meta.insert(
                row.character,
                SourceMeta {
                    title: row.title,
                    collection_title: row.collection_title,
                    pub_year,
                },
            );
        }
    }

    let mut warnings = Vec::new();
    let mut timelines: Vec<Timeline> = Vec::new();
    for file in timeline_files(&path)? {
        let parsed = parse_timeline_csv(std::fs::File::open(&file)?)
            .map_err(|e| anyhow::anyhow!("{}: {e}", file.display()))?;
        warnings.extend(
            parsed
                .warnings
                .into_iter()
                .map(|w| format!("{}: {w}", file.display())),
        );
        let mut t = parsed.timeline;
        if t.character.is_empty() {
            t.character = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        timelines.push(t);
    }

    let mut records = Vec::new();
    for t in &timelines {
        if t.is_empty() {
            continue;
        }
        let instances: Vec<ClozeInstance> = match mode.as_str() {
            "full" => full_sweep(t),
            "partial" => (1..=t.len())
                .map(|m| partial_sweep(t, m))
                .collect::<Result<Vec<_>, _>>()
                .map_err(cloze_err)?
                .into_iter()
                .flatten()
                .collect(),
            "ngram" => ngram_windows(t, k).map_err(cloze_err)?,
            other => return Err(CliError::Usage(format!("unknown mode {other:?}"))),
        };
        for inst in instances {
            let inst = match meta.get(&t.character) {
                Some(m) => inst.with_source(m.clone()),
                None => inst,
            };
            records.push(ClozeRecord::new(inst, template, hint).map_err(cloze_err)?);
        }
    }

    let mut inputs: Vec<(&str, &Path)> = vec![("timelines", &path)];
    if let Some(p) = &meta_path {
        inputs.push(("source_meta", p));
    }
    let provenance = Provenance::new("make-cloze", c.seed, &c.settings, &inputs)?;
    write_jsonl(&out_file(c, "cloze.jsonl")?, &records)?;
    let report = MakeReport {
        provenance,
        timelines: timelines.len(),
        instances: records.len(),
        mode,
        template,
        hint,
        warnings,
    };
    write_json(&out_file(c, "make_cloze.json")?, &report)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} cloze instances from {} timelines",
        report.instances, report.timelines
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Cloze instances from make-cloze.
    #[arg(long)]
    cloze: Option<String>,
    /// Generation provider id.
    #[arg(long)]
    generator: Option<String>,
    /// Embedding provider id.
    #[arg(long)]
    embedder: Option<String>,
    /// Similarity threshold on the 0-100 scale.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated templates: base, confabulation, null_shot, eccentric,
    /// llm_discussion, halueval, human_hallucination.
    #[arg(long)]
    template: Option<String>,
    /// on | off | both
    #[arg(long)]
    hint: Option<String>,
    #[arg(long)]
    max_new_tokens: Option<u32>,
    #[command(flatten)]
    http: HttpArgs,
}

#[derive(Serialize)]
struct EvalRow<'a> {
    model: &'a str,
    template: TemplateId,
    hint: bool,
    instance_id: String,
    character: &'a str,
    raw_output: &'a str,
    unparseable: bool,
    prediction: Option<String>,
    gold: &'a str,
    similarity: Option<f64>,
    similar: bool,
}

#[derive(Serialize)]
struct EvalCell {
    #[serde(flatten)]
    cell: AccuracyCell,
    unparseable: usize,
    breakdown: BreakdownReport,
}

#[derive(Serialize)]
struct EvalReport {
    provenance: Provenance,
    model: String,
    epsilon: f64,
    cells: Vec<EvalCell>,
    grid: String,
}

struct Generated {
    raw: String,
    lines: Vec<String>,
    unparseable: bool,
}

fn scoring_err(e: ScoringError) -> CliError {
    match e {
        ScoringError::Provider { instance_id, source } => {
            CliError::Provider(format!("{instance_id}: {source}"))
        }
        other => CliError::Failed(other.into()),
    }
}

pub fn run_eval(c: &mut Common, a: EvalArgs) -> CliResult<()> {
    let s = &mut c.settings;
    let cloze_path = s.input("cloze", a.cloze)?;
    let gen_id: String = s.required("generator", a.generator)?;
    let emb_id: String = s.required("embedder", a.embedder)?;
    let epsilon = s.value("epsilon", a.epsilon, 73.13f64)?;
    let templates: Vec<TemplateId> = s
        .value("template", a.template, "base".to_string())?
        .split(',')
        .map(|t| t.parse().map_err(CliError::Usage))
        .collect::<CliResult<_>>()?;
    let hints: Vec<bool> = match s.value("hint", a.hint, "off".to_string())?.as_str() {
        "off" => vec![false],
        "on" => vec![true],
        "both" => vec![false, true],
        other => return Err(CliError::Usage(format!("hint must be on|off|both, got {other:?}"))),
    };
    let max_new_tokens = s.value("max_new_tokens", a.max_new_tokens, 256u32)?;
    let http = a.http.resolve(s)?;
    let gen: Box<dyn Generator> = generator(&gen_id, &http)?;
    let emb = embedder(&emb_id, &http)?;

    let records: Vec<ClozeRecord> = read_jsonl(&cloze_path)?;
    if records.is_empty() {
        return Err(CliError::Usage(format!("{} has no cloze instances", cloze_path.display())));
    }
    let provenance = Provenance::new("run-eval", c.seed, &c.settings, &[("cloze", &cloze_path)])?;
    let model = gen.model_id().to_string();

    let mut cells = Vec::new();
    let mut rows_out: Vec<String> = Vec::new();
    for &template in &templates {
        let tpl = PromptTemplate::get(template);
        for &hint in &hints {
            let generated: Vec<Generated> = records
                .par_iter()
                .map(|r| {
                    let env = render_cloze_prompt(&r.instance, &tpl, hint).map_err(cloze_err)?;
                    let mut req = GenerationRequest::new(env.system, env.user);
                    req.max_new_tokens = max_new_tokens;
                    let resp = gen.generate(&req).map_err(provider_error)?;
                    let parsed = parse_model_output(&resp.text, r.instance.spec.k);
                    Ok(Generated {
                        raw: resp.text,
                        lines: parsed.lines,
                        unparseable: parsed.unparseable,
                    })
                })
                .collect::<CliResult<_>>()?;

            let mut preds = Vec::new();
            let mut golds = Vec::new();
            let mut meta = Vec::new();
            let mut slot_of = Vec::new();
            for (ri, (r, g)) in records.iter().zip(&generated).enumerate() {
                let inst = &r.instance;
                for j in 0..inst.spec.k {
                    let instance_id = if inst.spec.k == 1 {
                        inst.instance_id.clone()
                    } else {
                        format!("{}/{}", inst.instance_id, j + 1)
                    };
                    let text = if g.unparseable { None } else { g.lines.get(j).cloned() };
                    preds.push(Prediction { instance_id, text });
                    golds.push(inst.gold[j].clone());
                    meta.push(InstanceMeta {
                        event_type: inst.event_types[j],
                        event_word_count: inst.event_word_counts[j],
                        timeline_length: inst.timeline_length,
                        position: inst.spec.position + j,
                    });
                    slot_of.push((ri, j));
                }
            }
            let scored = score_predictions(&preds, &golds, emb.as_ref(), epsilon).map_err(scoring_err)?;
            let breakdown = breakdown_report(&scored, &meta).map_err(scoring_err)?;
            for (sp, &(ri, j)) in scored.iter().zip(&slot_of) {
                let row = EvalRow {
                    model: &model,
                    template,
                    hint,
                    instance_id: sp.instance_id.clone(),
                    character: &records[ri].instance.character,
                    raw_output: &generated[ri].raw,
                    unparseable: generated[ri].unparseable,
                    prediction: sp.prediction.clone(),
                    gold: &records[ri].instance.gold[j],
                    similarity: sp.similarity,
                    similar: sp.similar,
                };
                rows_out.push(serde_json::to_string(&row)?);
            }
            cells.push(EvalCell {
                cell: AccuracyCell {
                    model: model.clone(),
                    template,
                    hint,
                    n: scored.len(),
                    accuracy: breakdown.accuracy,
                },
                unparseable: generated.iter().filter(|g| g.unparseable).count(),
                breakdown,
            });
        }
    }

    let accuracy_cells: Vec<AccuracyCell> = cells.iter().map(|c| c.cell.clone()).collect();
    let grid = render_accuracy_grid(&accuracy_cells);
    let mut text = grid.clone();
    for cell in &cells {
        text.push_str(&format!(
            "\n== {} / {} / {}\n",
            cell.cell.model,
            cell.cell.template,
            if cell.cell.hint { "hint" } else { "no-hint" }
        ));
        text.push_str(&render_breakdown_text(&cell.breakdown));
    }
    let mut lines = rows_out.join("\n");
    lines.push('\n');
    std::fs::write(out_file(c, "predictions.jsonl")?, lines)?;
    std::fs::write(out_file(c, "eval_report.txt")?, &text)?;
    write_json(
        &out_file(c, "eval_report.json")?,
        &EvalReport {
            provenance,
            model,
            epsilon,
            cells,
            grid: grid.clone(),
        },
    )?;
    print!("{grid}");
    Ok(())
}
