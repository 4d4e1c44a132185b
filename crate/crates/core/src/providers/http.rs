use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    check_embeddings, request_digest, CacheMode, DiskCache, EmbeddingRequest, Embedder,
    FinishReason, GenerationRequest, GenerationResponse, Generator, NerProvider, NerRequest,
    ProviderError,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    /// Connection-level failure; retried.
    Connect(String),
    Status { code: u16, body: String },
    /// The response body could not be read as JSON.
    Body(String),
}

/// One JSON POST. Implementations must be safe to call concurrently.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, token: Option<&str>, body: &Value) -> Result<Value, TransportError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        UreqTransport {
            agent: config.into(),
        }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, token: Option<&str>, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.agent.post(url);
        if let Some(token) = token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
                TransportError::Timeout
            }
            other => TransportError::Connect(other.to_string()),
        })?;
        let code = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Body(e.to_string()))?;
        if !(200..300).contains(&code) {
            return Err(TransportError::Status { code, body: text });
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Body(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Same attempt budget, no sleeping between attempts.
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            initial_backoff: Duration::ZERO,
            multiplier: 1.0,
        }
    }

    /// Delay after failed attempt `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.initial_backoff
            .mul_f64(self.multiplier.powi(attempt.saturating_sub(1) as i32))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub id: String,
    pub endpoint: String,
    pub token: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

fn env_key(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect()
}

impl HttpConfig {
    pub fn new(id: impl Into<String>, endpoint: impl Into<String>) -> Self {
        HttpConfig {
            id: id.into(),
            endpoint: endpoint.into(),
            token: None,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            max_in_flight: 4,
        }
    }

    /// Reads `CLOZEKIT_<ID>_URL` and the optional `CLOZEKIT_<ID>_TOKEN`.
    pub fn from_env(id: &str) -> Result<Self, ProviderError> {
        let key = env_key(id);
        let url_var = format!("CLOZEKIT_{key}_URL");
        let endpoint = std::env::var(&url_var)
            .map_err(|_| ProviderError::Config(format!("{url_var} is not set")))?;
        let mut cfg = HttpConfig::new(id, endpoint);
        cfg.token = std::env::var(format!("CLOZEKIT_{key}_TOKEN")).ok();
        Ok(cfg)
    }
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// JSON-over-HTTP provider. Routes: `POST <endpoint>/generate`,
/// `/embed`, `/ner`; bodies mirror the request types.
pub struct HttpProvider {
    config: HttpConfig,
    transport: Box<dyn Transport>,
    cache: Option<DiskCache>,
    cache_mode: CacheMode,
    gate: Gate,
}

#[derive(Deserialize)]
struct WireGeneration {
    text: String,
    #[serde(default)]
    model_id: Option<String>,
    #[serde(default)]
    finish_reason: Option<FinishReason>,
}

#[derive(Deserialize)]
struct WireEmbedding {
    vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct WireNer {
    persons: Vec<Vec<String>>,
}

impl HttpProvider {
    pub fn new(config: HttpConfig, transport: Box<dyn Transport>) -> Self {
        let gate = Gate::new(config.max_in_flight);
        HttpProvider {
            config,
            transport,
            cache: None,
            cache_mode: CacheMode::Off,
            gate,
        }
    }

    pub fn from_config(config: HttpConfig) -> Self {
        let transport = Box::new(UreqTransport::new(config.timeout));
        HttpProvider::new(config, transport)
    }

    pub fn with_cache(mut self, cache: DiskCache, mode: CacheMode) -> Self {
        self.cache = Some(cache);
        self.cache_mode = mode;
        self
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn call<T, R>(
        &self,
        route: &str,
        request: &T,
        decode: impl Fn(Value) -> Result<R, String>,
    ) -> Result<R, ProviderError>
    where
        T: Serialize,
    {
        let digest = request_digest(&format!("{}/{route}", self.config.id), request);
        let malformed = |detail: String| ProviderError::Malformed {
            digest: digest.clone(),
            detail,
        };
        let cache = self.cache.as_ref().filter(|_| self.cache_mode != CacheMode::Off);
        if let Some(cache) = cache {
            if let Some(hit) = cache.get(&digest)? {
                return decode(hit).map_err(malformed);
            }
            if self.cache_mode == CacheMode::Replay {
                return Err(ProviderError::Cache(format!(
                    "no cached response for request {digest} in replay mode"
                )));
            }
        }
        let url = format!("{}/{route}", self.config.endpoint.trim_end_matches('/'));
        let body = serde_json::to_value(request).expect("requests serialize");
        let policy = self.config.retry;
        let attempts = policy.max_attempts.max(1);
        let mut last = TransportError::Timeout;
        for attempt in 1..=attempts {
            let result = {
                let _permit = self.gate.acquire();
                self.transport
                    .post_json(&url, self.config.token.as_deref(), &body)
            };
            match result {
                Ok(value) => {
                    let decoded = decode(value.clone()).map_err(malformed)?;
                    if let Some(cache) = cache {
                        cache.put(&digest, &value)?;
                    }
                    return Ok(decoded);
                }
                Err(TransportError::Status { code: 401 | 403, .. }) => {
                    return Err(ProviderError::Auth { digest });
                }
                Err(TransportError::Body(detail)) => return Err(malformed(detail)),
                Err(TransportError::Status { code, body }) if code != 429 && code < 500 => {
                    return Err(ProviderError::Transport {
                        attempts: attempt,
                        digest,
                        detail: format!("HTTP {code}: {body}"),
                    });
                }
                Err(e) => last = e,
            }
            if attempt < attempts {
                std::thread::sleep(policy.backoff(attempt));
            }
        }
        Err(match last {
            TransportError::Timeout => ProviderError::Timeout { attempts, digest },
            TransportError::Status { code, body } => ProviderError::Transport {
                attempts,
                digest,
                detail: format!("HTTP {code}: {body}"),
            },
            TransportError::Connect(detail) | TransportError::Body(detail) => {
                ProviderError::Transport {
                    attempts,
                    digest,
                    detail,
                }
            }
        })
    }
}

impl Generator for HttpProvider {
    fn model_id(&self) -> &str {
        &self.config.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        self.call("generate", request, |v| {
            let w: WireGeneration = serde_json::from_value(v).map_err(|e| e.to_string())?;
            Ok(GenerationResponse {
                text: w.text,
                model_id: w.model_id.unwrap_or_else(|| self.config.id.clone()),
                finish_reason: w.finish_reason.unwrap_or(FinishReason::Stop),
            })
        })
    }
}

impl Embedder for HttpProvider {
    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        if request.texts.is_empty() {
            return Err(ProviderError::InvalidArgument("empty embedding batch".into()));
        }
        let vectors = self.call("embed", request, |v| {
            serde_json::from_value::<WireEmbedding>(v)
                .map(|w| w.vectors)
                .map_err(|e| e.to_string())
        })?;
        check_embeddings(request.texts.len(), &vectors)?;
        Ok(vectors)
    }
}

impl NerProvider for HttpProvider {
    fn persons(&self, texts: &[&str]) -> Result<Vec<Vec<String>>, ProviderError> {
        let request = NerRequest {
            texts: texts.iter().map(|t| t.to_string()).collect(),
        };
        let persons = self.call("ner", &request, |v| {
            serde_json::from_value::<WireNer>(v)
                .map(|w| w.persons)
                .map_err(|e| e.to_string())
        })?;
        if persons.len() != texts.len() {
            return Err(ProviderError::Contract(format!(
                "NER returned {} results for {} texts",
                persons.len(),
                texts.len()
            )));
        }
        Ok(persons)
    }
}
