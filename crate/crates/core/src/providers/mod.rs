//! Contracts for the external model services (generation, embedding,
//! person-name tagging), deterministic mocks, and a JSON-over-HTTP client.

mod cache;
mod http;
mod mock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheMode, DiskCache};
pub use http::{
    HttpConfig, HttpProvider, RetryPolicy, Transport, TransportError, UreqTransport,
};
pub use mock::{
    BagOfWordsEmbedder, EchoGenerator, FixedGenerator, PrefixOracle, StaticNer,
};

/// Task prefix expected by the narrative embedding model.
pub const NARRATIVE_TASK_PREFIX: &str =
    "Retrieve stories with a similar narrative to the given story:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidArgument(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("authentication rejected (request {digest})")]
    Auth { digest: String },
    #[error("timed out after {attempts} attempts (request {digest})")]
    Timeout { attempts: u32, digest: String },
    #[error("malformed response (request {digest}): {detail}")]
    Malformed { digest: String, detail: String },
    #[error("transport failure after {attempts} attempts (request {digest}): {detail}")]
    Transport {
        attempts: u32,
        digest: String,
        detail: String,
    },
    #[error("provider contract violated: {0}")]
    Contract(String),
    #[error("cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system: Option<String>,
    pub user: String,
    pub max_new_tokens: u32,
    /// Greedy decoding when true.
    pub deterministic: bool,
}

impl GenerationRequest {
    pub fn new(system: Option<String>, user: impl Into<String>) -> Self {
        GenerationRequest {
            system,
            user: user.into(),
            max_new_tokens: 256,
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub model_id: String,
    pub finish_reason: FinishReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub texts: Vec<String>,
    pub task_prefix: Option<String>,
}

impl EmbeddingRequest {
    pub fn new(texts: Vec<String>) -> Self {
        EmbeddingRequest {
            texts,
            task_prefix: None,
        }
    }

    pub fn narrative(texts: Vec<String>) -> Self {
        EmbeddingRequest {
            texts,
            task_prefix: Some(NARRATIVE_TASK_PREFIX.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NerRequest {
    pub texts: Vec<String>,
}

pub trait Generator: Send + Sync {
    fn model_id(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError>;
}

/// PERSON spans per input text, in input order.
pub trait NerProvider: Send + Sync {
    fn persons(&self, texts: &[&str]) -> Result<Vec<Vec<String>>, ProviderError>;
}

/// Hex SHA-256 of the request's JSON encoding, used in errors and as the
/// cache key.
pub fn request_digest<T: Serialize>(kind: &str, request: &T) -> String {
    let body = serde_json::to_vec(request).expect("requests serialize");
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update([0]);
    h.update(&body);
    hex::encode(h.finalize())
}

/// Checks the shape of an embedding batch: one vector per text and a
/// single dimension.
pub fn check_embeddings(texts: usize, vectors: &[Vec<f64>]) -> Result<(), ProviderError> {
    if vectors.len() != texts {
        return Err(ProviderError::Contract(format!(
            "{} vectors for {texts} texts",
            vectors.len()
        )));
    }
    if let Some(first) = vectors.first() {
        if let Some(v) = vectors.iter().find(|v| v.len() != first.len()) {
            return Err(ProviderError::Contract(format!(
                "dimension mismatch in batch: {} vs {}",
                first.len(),
                v.len()
            )));
        }
    }
    Ok(())
}
