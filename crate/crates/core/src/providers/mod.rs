//! Text generation and embedding providers.
//!
//! Two provider kinds exist: `mock`, a deterministic offline implementation
//! that never touches the network, and `openai`, which speaks the
//! chat-completions / embeddings JSON protocol over HTTPS. Either can be
//! wrapped in a content-addressed on-disk cache.

mod cache;
mod mock;
mod prompt;
mod remote;

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::embedding::{EmbeddingError, EmbeddingVector};

pub use cache::{cache_key, CacheKey, CachedEmbedder, CachedGenerator, OperationKind, ResponseCache};
pub use mock::{MockEmbedder, MockGenerator, DEFAULT_MOCK_DIMENSION};
pub use prompt::{paraphrase_prompt, parse_paraphrase_lines, PARAPHRASE_PROMPT_VERSION};
pub use remote::{
    HttpTransport, OfflineTransport, OpenAiEmbedder, OpenAiGenerator, Transport, TransportError,
};

pub const DEFAULT_PARAPHRASE_COUNT: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("transport failure after {attempts} attempt(s): {source}")]
    Transport {
        attempts: usize,
        #[source]
        source: TransportError,
    },
    #[error("provider returned {} of {requested} requested paraphrases", returned.len())]
    Degraded {
        requested: usize,
        returned: Vec<String>,
    },
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unexpected provider response: {0}")]
    InvalidResponse(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingCredential(String),
    #[error("invalid embedding: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("cache error: {0}")]
    Cache(#[from] std::io::Error),
}

impl ProviderError {
    /// Whether the failure came from talking to the remote service.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            ProviderError::Transport { .. } | ProviderError::MissingCredential(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    OpenAi,
}

/// Settings for one provider role (paraphrasing, answer generation or embedding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: f64,
    pub top_p: f64,
    pub timeout_ms: u64,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Base delay for exponential backoff between attempts.
    pub backoff_ms: u64,
    pub chat_path: String,
    pub embeddings_path: String,
    pub batch_size: usize,
    pub max_concurrency: usize,
    /// Mock only.
    pub seed: u64,
    /// Mock only.
    pub dimension: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-3.5-turbo".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: 1.0,
            top_p: 1.0,
            timeout_ms: 60_000,
            max_retries: 2,
            backoff_ms: 500,
            chat_path: "/chat/completions".into(),
            embeddings_path: "/embeddings".into(),
            batch_size: 64,
            max_concurrency: 4,
            seed: 0,
            dimension: DEFAULT_MOCK_DIMENSION,
        }
    }
}

impl ProviderConfig {
    pub fn embedding_default() -> Self {
        Self {
            model_name: "text-embedding-ada-002".into(),
            ..Self::default()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(format!("temperature {} must be >= 0", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p {} must lie in (0, 1]", self.top_p));
        }
        if self.batch_size == 0 || self.max_concurrency == 0 {
            return Err("batch_size and max_concurrency must be positive".into());
        }
        if self.kind == ProviderKind::Mock && self.dimension == 0 {
            return Err("mock dimension must be positive".into());
        }
        if self.max_retries > 10 {
            return Err(format!("max_retries {} is unreasonably large", self.max_retries));
        }
        Ok(())
    }
}

/// Produces paraphrases of a question and answers to questions.
pub trait Generator: Send + Sync {
    /// Everything that influences outputs; part of every cache key.
    fn identity(&self) -> Value;

    /// Exactly `k` distinct paraphrases, none identical to `question`.
    fn paraphrase(&self, question: &str, k: usize) -> Result<Vec<String>, ProviderError>;

    fn generate_answer(&self, question: &str) -> Result<String, ProviderError>;
}

pub trait Embedder: Send + Sync {
    fn identity(&self) -> Value;

    /// Short label stored on every produced vector.
    fn provider_tag(&self) -> String;

    /// One vector per text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;
}

pub(crate) fn check_question(question: &str) -> Result<(), ProviderError> {
    if question.trim().is_empty() {
        return Err(ProviderError::Precondition("question is empty".into()));
    }
    Ok(())
}

pub(crate) fn check_paraphrase_args(question: &str, k: usize) -> Result<(), ProviderError> {
    check_question(question)?;
    if k == 0 {
        return Err(ProviderError::Precondition("paraphrase count must be positive".into()));
    }
    Ok(())
}

pub(crate) fn check_texts(texts: &[String]) -> Result<(), ProviderError> {
    if texts.is_empty() {
        return Err(ProviderError::Precondition("nothing to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(ProviderError::Precondition(format!("text {i} is empty")));
    }
    Ok(())
}

/// Checks that every vector has the same dimension (and `expected`, if given).
pub(crate) fn check_uniform(
    vectors: &[EmbeddingVector],
    expected: Option<usize>,
) -> Result<(), ProviderError> {
    let Some(first) = vectors.first() else {
        return Ok(());
    };
    let want = expected.unwrap_or(first.dimension());
    for v in vectors {
        if v.dimension() != want {
            return Err(ProviderError::DimensionMismatch {
                expected: want,
                got: v.dimension(),
            });
        }
    }
    Ok(())
}

/// Applies `f` to every item with at most `limit` calls in flight; results
/// come back in input order.
pub fn bounded_map<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if limit <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut out = Vec::with_capacity(items.len());
    for wave in items.chunks(limit) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = wave.iter().map(|item| scope.spawn(|| f(item))).collect();
            for h in handles {
                out.push(h.join().expect("provider worker panicked"));
            }
        });
    }
    out
}

/// An HTTP transport if any of `configs` talks to a remote service, otherwise
/// one that refuses all requests.
pub fn transport_for(configs: &[&ProviderConfig]) -> Result<Arc<dyn Transport>, ProviderError> {
    if configs.iter().any(|c| c.kind == ProviderKind::OpenAi) {
        let http = HttpTransport::new().map_err(|source| ProviderError::Transport { attempts: 0, source })?;
        Ok(Arc::new(http))
    } else {
        Ok(Arc::new(OfflineTransport))
    }
}

pub fn build_generator(
    config: &ProviderConfig,
    transport: Arc<dyn Transport>,
) -> Result<Box<dyn Generator>, ProviderError> {
    config.validate().map_err(ProviderError::Precondition)?;
    Ok(match config.kind {
        ProviderKind::Mock => Box::new(MockGenerator::new(config.seed)),
        ProviderKind::OpenAi => Box::new(OpenAiGenerator::new(config.clone(), transport)),
    })
}

pub fn build_embedder(
    config: &ProviderConfig,
    transport: Arc<dyn Transport>,
) -> Result<Box<dyn Embedder>, ProviderError> {
    config.validate().map_err(ProviderError::Precondition)?;
    Ok(match config.kind {
        ProviderKind::Mock => Box::new(MockEmbedder::new(config.seed, config.dimension)),
        ProviderKind::OpenAi => Box::new(OpenAiEmbedder::new(config.clone(), transport)),
    })
}

/// Builds a generator, wrapped in a response cache when `cache_dir` is given.
pub fn generator_with_cache(
    config: &ProviderConfig,
    transport: Arc<dyn Transport>,
    cache_dir: Option<&Path>,
) -> Result<Box<dyn Generator>, ProviderError> {
    let inner = build_generator(config, transport)?;
    Ok(match cache_dir {
        Some(dir) => Box::new(CachedGenerator::new(inner, ResponseCache::open(dir)?)),
        None => inner,
    })
}

pub fn embedder_with_cache(
    config: &ProviderConfig,
    transport: Arc<dyn Transport>,
    cache_dir: Option<&Path>,
) -> Result<Box<dyn Embedder>, ProviderError> {
    let inner = build_embedder(config, transport)?;
    Ok(match cache_dir {
        Some(dir) => Box::new(CachedEmbedder::new(inner, ResponseCache::open(dir)?)),
        None => inner,
    })
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn identity(&self) -> Value {
        (**self).identity()
    }
    fn paraphrase(&self, question: &str, k: usize) -> Result<Vec<String>, ProviderError> {
        (**self).paraphrase(question, k)
    }
    fn generate_answer(&self, question: &str) -> Result<String, ProviderError> {
        (**self).generate_answer(question)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn identity(&self) -> Value {
        (**self).identity()
    }
    fn provider_tag(&self) -> String {
        (**self).provider_tag()
    }
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed(texts)
    }
}
