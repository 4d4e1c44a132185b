//! Narrative-cloze instances: full-event, partial-event and n-gram masks
//! over a timeline, and the prompts sent to the model.

mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::{EventType, Timeline};

pub use templates::{PromptTemplate, TemplateId, BASE_PROMPT, NGRAM_BASE_PROMPT};

/// Placeholder written into masked slots.
pub const PLACEHOLDER: &str = "[MASKED]";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClozeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("template {0} needs source metadata (title, collection_title, pub_year)")]
    MissingMetadata(TemplateId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MaskKind {
    Full,
    Partial,
    Ngram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskSpec {
    pub kind: MaskKind,
    /// 1-based index of the (first) masked event.
    pub position: usize,
    /// Number of consecutive masked events.
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_token_count: Option<usize>,
}

/// Document metadata substituted into the null-shot prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceMeta {
    pub title: String,
    pub collection_title: String,
    pub pub_year: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeInstance {
    pub instance_id: String,
    pub character: String,
    pub spec: MaskSpec,
    /// Numbered timeline lines with placeholders in the masked slots.
    pub lines: Vec<String>,
    pub gold: Vec<String>,
    pub date_context: Vec<String>,
    pub event_types: Vec<EventType>,
    pub event_word_counts: Vec<usize>,
    pub timeline_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceMeta>,
}

fn line(index: usize, date: &str, text: &str) -> String {
    let text: Vec<&str> = text.split_whitespace().collect();
    format!("{index}. {date}, {}", text.join(" "))
}

/// `i. <date>, <summary>` for every event.
pub fn render_timeline_lines(timeline: &Timeline) -> Vec<String> {
    timeline
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| line(i + 1, &e.date_label(), &e.summary))
        .collect()
}

impl ClozeInstance {
    pub fn rendered_timeline(&self) -> String {
        self.lines.join("\n")
    }

    pub fn with_source(mut self, source: SourceMeta) -> Self {
        self.source = Some(source);
        self
    }

    /// 0-based line indices of the masked slots.
    pub fn masked_lines(&self) -> std::ops::Range<usize> {
        self.spec.position - 1..self.spec.position - 1 + self.spec.k
    }

    /// Fills the masked slots with `answers`, one per slot.
    pub fn restore(&self, answers: &[String]) -> Result<Vec<String>, ClozeError> {
        if answers.len() != self.spec.k {
            return Err(ClozeError::InvalidArgument(format!(
                "expected {} answers, got {}",
                self.spec.k,
                answers.len()
            )));
        }
        let mut out = self.lines.clone();
        for (j, idx) in self.masked_lines().enumerate() {
            out[idx] = line(idx + 1, &self.date_context[j], &answers[j]);
        }
        Ok(out)
    }

    fn build(timeline: &Timeline, spec: MaskSpec, instance_id: String) -> Self {
        let mut lines = render_timeline_lines(timeline);
        let mut gold = Vec::new();
        let mut date_context = Vec::new();
        let mut event_types = Vec::new();
        let mut event_word_counts = Vec::new();
        let first = spec.position - 1;
        for (idx, e) in timeline.events.iter().enumerate().skip(first).take(spec.k) {
            let date = e.date_label();
            let slot = match spec.masked_token_count {
                Some(m) => {
                    let words: Vec<&str> = e.summary.split_whitespace().collect();
                    let mut revealed = words[..words.len() - m].to_vec();
                    revealed.push(PLACEHOLDER);
                    revealed.join(" ")
                }
                None => PLACEHOLDER.to_string(),
            };
            lines[idx] = line(idx + 1, &date, &slot);
            gold.push(e.summary.clone());
            date_context.push(date);
            event_types.push(e.event_type);
            event_word_counts.push(e.word_count());
        }
        ClozeInstance {
            instance_id,
            character: timeline.character.clone(),
            spec,
            lines,
            gold,
            date_context,
            event_types,
            event_word_counts,
            timeline_length: timeline.len(),
            source: None,
        }
    }
}

fn check_position(timeline: &Timeline, position: usize, k: usize) -> Result<(), ClozeError> {
    if position == 0 || k == 0 || position + k - 1 > timeline.len() {
        return Err(ClozeError::InvalidArgument(format!(
            "slots {position}..{} out of range for a timeline of {} events",
            position + k.saturating_sub(1),
            timeline.len()
        )));
    }
    Ok(())
}

/// Masks the whole summary of event `m` (1-based).
pub fn mask_full(timeline: &Timeline, m: usize) -> Result<ClozeInstance, ClozeError> {
    check_position(timeline, m, 1)?;
    let spec = MaskSpec {
        kind: MaskKind::Full,
        position: m,
        k: 1,
        masked_token_count: None,
    };
    Ok(ClozeInstance::build(
        timeline,
        spec,
        format!("{}#full:{m}", timeline.character),
    ))
}

/// Masks the trailing `masked_tokens` words of event `m`, revealing the
/// left prefix. Masking every word renders exactly like [`mask_full`].
pub fn mask_partial(
    timeline: &Timeline,
    m: usize,
    masked_tokens: usize,
) -> Result<ClozeInstance, ClozeError> {
    check_position(timeline, m, 1)?;
    let w = timeline.events[m - 1].word_count();
    if masked_tokens == 0 || masked_tokens > w {
        return Err(ClozeError::InvalidArgument(format!(
            "masked_tokens must be in 1..={w}, got {masked_tokens}"
        )));
    }
    let spec = MaskSpec {
        kind: MaskKind::Partial,
        position: m,
        k: 1,
        masked_token_count: Some(masked_tokens),
    };
    Ok(ClozeInstance::build(
        timeline,
        spec,
        format!("{}#partial:{m}:{masked_tokens}", timeline.character),
    ))
}

/// Masks `k` consecutive events starting at `start`. `k = 1` renders
/// exactly like [`mask_full`].
pub fn mask_ngram(timeline: &Timeline, start: usize, k: usize) -> Result<ClozeInstance, ClozeError> {
    check_position(timeline, start, k)?;
    let spec = MaskSpec {
        kind: MaskKind::Ngram,
        position: start,
        k,
        masked_token_count: None,
    };
    Ok(ClozeInstance::build(
        timeline,
        spec,
        format!("{}#ngram:{start}:{k}", timeline.character),
    ))
}

/// Every full-event instance of the timeline.
pub fn full_sweep(timeline: &Timeline) -> Vec<ClozeInstance> {
    (1..=timeline.len())
        .map(|m| mask_full(timeline, m).expect("in range"))
        .collect()
}

/// `masked_tokens = w, w-1, ..., 1` for event `m`.
pub fn partial_sweep(timeline: &Timeline, m: usize) -> Result<Vec<ClozeInstance>, ClozeError> {
    check_position(timeline, m, 1)?;
    let w = timeline.events[m - 1].word_count();
    (1..=w).rev().map(|t| mask_partial(timeline, m, t)).collect()
}

/// Every window of `k` consecutive events.
pub fn ngram_windows(timeline: &Timeline, k: usize) -> Result<Vec<ClozeInstance>, ClozeError> {
    if k == 0 {
        return Err(ClozeError::InvalidArgument("k must be >= 1".into()));
    }
    if k > timeline.len() {
        return Ok(Vec::new());
    }
    (1..=timeline.len() - k + 1)
        .map(|s| mask_ngram(timeline, s, k))
        .collect()
}

/// System/user message pair handed to a generation provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub system: Option<String>,
    pub user: String,
}

/// Renders the prompt for `instance`. With `event_type_hint`, each masked
/// line is suffixed with `(event type: <label>)`.
pub fn render_cloze_prompt(
    instance: &ClozeInstance,
    template: &PromptTemplate,
    event_type_hint: bool,
) -> Result<PromptEnvelope, ClozeError> {
    let mut lines = instance.lines.clone();
    if event_type_hint {
        for (j, idx) in instance.masked_lines().enumerate() {
            lines[idx].push_str(&format!(" (event type: {})", instance.event_types[j]));
        }
    }
    let timeline = lines.join("\n");
    let base = if instance.spec.k == 1 {
        BASE_PROMPT.replacen("{timeline}", &timeline, 1)
    } else {
        NGRAM_BASE_PROMPT
            .replacen("{k}", &instance.spec.k.to_string(), 1)
            .replacen("{timeline}", &timeline, 1)
    };
    let user = match template.instruction_prefix {
        Some(prefix) => {
            let prefix = if template.needs_source_metadata() {
                let meta = instance
                    .source
                    .as_ref()
                    .ok_or(ClozeError::MissingMetadata(template.id))?;
                prefix
                    .replace("{title}", &meta.title)
                    .replace("{collection_title}", &meta.collection_title)
                    .replace("{pub_year}", &meta.pub_year)
            } else {
                prefix.to_string()
            };
            format!("{prefix}\n\n{base}")
        }
        None => base,
    };
    Ok(PromptEnvelope {
        system: template.system_text.map(str::to_string),
        user,
    })
}

/// Model output split into the expected number of reconstructions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub lines: Vec<String>,
    pub unparseable: bool,
}

/// Takes the first `expected_lines` nonempty lines, with list numbering,
/// bullets and wrapping bold markers removed. Markdown headings are
/// skipped. Too few lines marks the output unparseable.
pub fn parse_model_output(text: &str, expected_lines: usize) -> ParsedOutput {
    let expected = expected_lines.max(1);
    let lines: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(clean_line)
        .filter(|l| !l.is_empty())
        .take(expected)
        .collect();
    ParsedOutput {
        unparseable: lines.len() < expected,
        lines,
    }
}

fn clean_line(line: &str) -> String {
    let mut s = line.trim();
    for bullet in ["- ", "* ", "• ", "+ "] {
        if let Some(rest) = s.strip_prefix(bullet) {
            s = rest.trim_start();
            break;
        }
    }
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            s = r.trim_start();
        }
    }
    let s = s.trim();
    let s = s
        .strip_prefix("**")
        .and_then(|x| x.strip_suffix("**"))
        .unwrap_or(s);
    s.trim().to_string()
}

/// One line of a cloze batch file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeRecord {
    #[serde(flatten)]
    pub instance: ClozeInstance,
    pub rendered_timeline: String,
    pub template_id: TemplateId,
    pub hint: bool,
    pub prompt: PromptEnvelope,
}

impl ClozeRecord {
    pub fn new(instance: ClozeInstance, template: TemplateId, hint: bool) -> Result<Self, ClozeError> {
        let prompt = render_cloze_prompt(&instance, &PromptTemplate::get(template), hint)?;
        Ok(ClozeRecord {
            rendered_timeline: instance.rendered_timeline(),
            instance,
            template_id: template,
            hint,
            prompt,
        })
    }
}
