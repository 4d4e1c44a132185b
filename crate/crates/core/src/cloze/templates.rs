use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Single-event instruction with a `{timeline}` slot.
pub const BASE_PROMPT: &str = include_str!("../../templates/base.txt");

/// Multi-event variant used for n-gram windows: `{k}` and `{timeline}`.
pub const NGRAM_BASE_PROMPT: &str = "\
{k} consecutive event summaries in the timeline below have been replaced by the token
[MASKED]. The dates are shown as context. Supply the exact missing event
summaries in order, **one concise sentence per line**, with no additional commentary.

### Timeline
{timeline}

### Missing events
";

const CONFABULATION: &str = include_str!("../../templates/confabulation.txt");
const NULL_SHOT: &str = include_str!("../../templates/null_shot.txt");
const ECCENTRIC: &str = include_str!("../../templates/eccentric.txt");
const LLM_DISCUSSION: &str = include_str!("../../templates/llm_discussion.txt");
const HALUEVAL: &str = include_str!("../../templates/halueval.txt");
const HUMAN_HALLUCINATION: &str = include_str!("../../templates/human_hallucination.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Base,
    Confabulation,
    NullShot,
    Eccentric,
    LlmDiscussion,
    Halueval,
    HumanHallucination,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::Base,
        TemplateId::Confabulation,
        TemplateId::NullShot,
        TemplateId::Eccentric,
        TemplateId::LlmDiscussion,
        TemplateId::Halueval,
        TemplateId::HumanHallucination,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Base => "base",
            TemplateId::Confabulation => "confabulation",
            TemplateId::NullShot => "null_shot",
            TemplateId::Eccentric => "eccentric",
            TemplateId::LlmDiscussion => "llm_discussion",
            TemplateId::Halueval => "halueval",
            TemplateId::HumanHallucination => "human_hallucination",
        }
    }

    /// Column label used in accuracy grids.
    pub fn short_label(self) -> &'static str {
        match self {
            TemplateId::Base => "-",
            TemplateId::Confabulation => "CF",
            TemplateId::NullShot => "NS",
            TemplateId::Eccentric => "EA",
            TemplateId::LlmDiscussion => "DS",
            TemplateId::Halueval => "HE",
            TemplateId::HumanHallucination => "HH",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown template {s:?} (expected one of {})",
                    TemplateId::ALL.map(|t| t.as_str()).join("|")
                )
            })
    }
}

/// A steering template: an optional system message or an optional
/// instruction prefix, combined with the base instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub system_text: Option<&'static str>,
    pub instruction_prefix: Option<&'static str>,
}

impl PromptTemplate {
    pub fn get(id: TemplateId) -> Self {
        let (system_text, instruction_prefix) = match id {
            TemplateId::Base => (None, None),
            TemplateId::Confabulation => (Some(CONFABULATION), None),
            TemplateId::NullShot => (None, Some(NULL_SHOT)),
            TemplateId::Eccentric => (Some(ECCENTRIC), None),
            TemplateId::LlmDiscussion => (Some(LLM_DISCUSSION), None),
            TemplateId::Halueval => (None, Some(HALUEVAL)),
            TemplateId::HumanHallucination => (Some(HUMAN_HALLUCINATION), None),
        };
        PromptTemplate {
            id,
            system_text,
            instruction_prefix,
        }
    }

    pub fn needs_source_metadata(&self) -> bool {
        self.id == TemplateId::NullShot
    }

    /// SHA-256 over the template's checked-in text (the base prompt for
    /// [`TemplateId::Base`]).
    pub fn content_sha256(&self) -> String {
        let text = self
            .system_text
            .or(self.instruction_prefix)
            .unwrap_or(BASE_PROMPT);
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
