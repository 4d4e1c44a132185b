use thiserror::Error;

use crate::cloze::ClozeError;
use crate::corpus::CorpusError;
use crate::nameaudit::NameAuditError;
use crate::providers::ProviderError;
use crate::scoring::ScoringError;
use crate::stats::StatsError;
use crate::strsearch::SearchError;
use crate::timeline::TimelineError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for callers that drive several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    NameAudit(#[from] NameAuditError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Cloze(#[from] ClozeError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
