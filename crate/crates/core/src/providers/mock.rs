use super::{
    check_embeddings, EmbeddingRequest, Embedder, FinishReason, GenerationRequest,
    GenerationResponse, Generator, NerProvider, ProviderError,
};

/// Returns the user message unchanged.
#[derive(Debug, Default, Clone)]
pub struct EchoGenerator;

impl Generator for EchoGenerator {
    fn model_id(&self) -> &str {
        "mock-echo"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        Ok(GenerationResponse {
            text: request.user.clone(),
            model_id: self.model_id().to_string(),
            finish_reason: FinishReason::Stop,
        })
    }
}

/// Returns the same text for every request.
#[derive(Debug, Clone)]
pub struct FixedGenerator {
    text: String,
}

impl FixedGenerator {
    pub fn new(text: impl Into<String>) -> Self {
        FixedGenerator { text: text.into() }
    }
}

impl Generator for FixedGenerator {
    fn model_id(&self) -> &str {
        "mock-fixed"
    }

    fn generate(&self, _request: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        Ok(GenerationResponse {
            text: self.text.clone(),
            model_id: self.model_id().to_string(),
            finish_reason: FinishReason::Stop,
        })
    }
}

/// Continues a document verbatim. The prompt must be the first `j`
/// sentences of a known document joined by single spaces; the reply is the
/// next `window` sentences. Unknown prompts get an empty reply.
#[derive(Debug, Clone)]
pub struct PrefixOracle {
    docs: Vec<Vec<String>>,
    window: usize,
}

impl PrefixOracle {
    pub fn new(docs: Vec<Vec<String>>, window: usize) -> Self {
        PrefixOracle { docs, window }
    }

    fn continuation(&self, prompt: &str) -> Option<String> {
        let prompt = prompt.trim();
        for sentences in &self.docs {
            let mut consumed = 0usize;
            let mut j = 0;
            while j < sentences.len() {
                let s = sentences[j].as_str();
                let sep = usize::from(j > 0);
                let end = consumed + sep + s.len();
                if end > prompt.len()
                    || (sep == 1 && prompt.as_bytes()[consumed] != b' ')
                    || &prompt[consumed + sep..end] != s
                {
                    break;
                }
                consumed = end;
                j += 1;
                if consumed == prompt.len() {
                    let stop = (j + self.window).min(sentences.len());
                    return Some(sentences[j..stop].join(" "));
                }
            }
        }
        None
    }
}

impl Generator for PrefixOracle {
    fn model_id(&self) -> &str {
        "mock-prefix"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        Ok(GenerationResponse {
            text: self.continuation(&request.user).unwrap_or_default(),
            model_id: self.model_id().to_string(),
            finish_reason: FinishReason::Stop,
        })
    }
}

/// Hashed bag-of-words counts. The task prefix is ignored so that texts
/// with disjoint vocabularies stay orthogonal.
#[derive(Debug, Clone)]
pub struct BagOfWordsEmbedder {
    dim: usize,
}

impl Default for BagOfWordsEmbedder {
    fn default() -> Self {
        BagOfWordsEmbedder { dim: 1 << 16 }
    }
}

impl BagOfWordsEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        BagOfWordsEmbedder { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            // FNV-1a, stable across platforms and runs
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for c in token.chars().flat_map(char::to_lowercase) {
                let mut buf = [0u8; 4];
                for b in c.encode_utf8(&mut buf).bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
            v[(h % self.dim as u64) as usize] += 1.0;
        }
        v
    }
}

impl Embedder for BagOfWordsEmbedder {
    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, ProviderError> {
        if request.texts.is_empty() {
            return Err(ProviderError::InvalidArgument("empty embedding batch".into()));
        }
        let out: Vec<Vec<f64>> = request.texts.iter().map(|t| self.vector(t)).collect();
        check_embeddings(request.texts.len(), &out)?;
        Ok(out)
    }
}

/// Returns a fixed list of PERSON spans per text, in order.
#[derive(Debug, Clone, Default)]
pub struct StaticNer {
    spans: Vec<Vec<String>>,
}

impl StaticNer {
    pub fn new(spans: Vec<Vec<String>>) -> Self {
        StaticNer { spans }
    }
}

impl NerProvider for StaticNer {
    fn persons(&self, _texts: &[&str]) -> Result<Vec<Vec<String>>, ProviderError> {
        Ok(self.spans.clone())
    }
}
