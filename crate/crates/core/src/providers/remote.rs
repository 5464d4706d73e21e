//! HTTPS providers speaking the OpenAI-style JSON protocol.
//!
//! Chat: `POST {base_url}{chat_path}` with `model`, `messages`, `temperature`
//! and `top_p`; the answer is `choices[0].message.content`.
//! Embeddings: `POST {base_url}{embeddings_path}` with `model` and `input`;
//! vectors come back in `data[*].embedding`, ordered by `data[*].index`.

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::prompt::{paraphrase_prompt, parse_paraphrase_lines, PARAPHRASE_PROMPT_VERSION};
use super::{
    bounded_map, check_paraphrase_args, check_question, check_texts, check_uniform, Embedder,
    Generator, ProviderConfig, ProviderError,
};
use crate::embedding::EmbeddingVector;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("could not decode response: {0}")]
    Decode(String),
}

impl TransportError {
    /// Timeouts, connection failures, rate limiting and server errors are retried.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Network(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Decode(_) => false,
        }
    }
}

/// Sends one JSON request and returns the decoded JSON response.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError>;
}

/// Refuses every request; used when no configured provider needs the network.
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn post_json(&self, url: &str, _: Option<&str>, _: &Value, _: Duration) -> Result<Value, TransportError> {
        Err(TransportError::Network(format!("offline: refusing request to {url}")))
    }
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<Value, TransportError> {
        let mut req = self
            .client
            .post(url)
            .timeout(timeout)
            .header("content-type", "application/json")
            .body(serde_json::to_vec(body).map_err(|e| TransportError::Decode(e.to_string()))?);
        if let Some(key) = api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if !status.is_success() {
            let mut body = text;
            body.truncate(512);
            return Err(TransportError::Status {
                status: status.as_u16(),
                body,
            });
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))
    }
}

fn api_key(config: &ProviderConfig) -> Result<String, ProviderError> {
    std::env::var(&config.api_key_env)
        .ok()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| ProviderError::MissingCredential(config.api_key_env.clone()))
}

fn endpoint(config: &ProviderConfig, path: &str) -> String {
    format!("{}{}", config.base_url.trim_end_matches('/'), path)
}

/// Posts with exponential backoff: `backoff_ms · 2^attempt` between attempts.
fn post_with_retries(
    config: &ProviderConfig,
    transport: &dyn Transport,
    url: &str,
    body: &Value,
) -> Result<Value, ProviderError> {
    let key = api_key(config)?;
    let attempts = config.max_retries as usize + 1;
    let mut attempt = 0;
    loop {
        attempt += 1;
        match transport.post_json(url, Some(&key), body, config.timeout()) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && attempt < attempts => {
                let delay = config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                log::warn!("request to {url} failed ({e}); retry {attempt} in {delay} ms");
                std::thread::sleep(Duration::from_millis(delay));
            }
            Err(source) => return Err(ProviderError::Transport { attempts: attempt, source }),
        }
    }
}

pub struct OpenAiGenerator {
    config: ProviderConfig,
    transport: Arc<dyn Transport>,
}

impl OpenAiGenerator {
    pub fn new(config: ProviderConfig, transport: Arc<dyn Transport>) -> Self {
        Self { config, transport }
    }

    fn chat(&self, prompt: &str) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
        });
        let url = endpoint(&self.config, &self.config.chat_path);
        let resp = post_with_retries(&self.config, self.transport.as_ref(), &url, &body)?;
        let content = resp
            .pointer("/choices/0/message/content")
            .ok_or_else(|| ProviderError::InvalidResponse("missing choices[0].message.content".into()))?;
        match content {
            Value::String(s) if !s.trim().is_empty() => Ok(s.trim().to_string()),
            Value::String(_) | Value::Null => Err(ProviderError::EmptyCompletion),
            _ => Err(ProviderError::InvalidResponse("message content is not a string".into())),
        }
    }
}

impl Generator for OpenAiGenerator {
    fn identity(&self) -> Value {
        json!({
            "kind": "openai-chat",
            "base_url": self.config.base_url,
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
            "paraphrase_prompt": PARAPHRASE_PROMPT_VERSION,
        })
    }

    fn paraphrase(&self, question: &str, k: usize) -> Result<Vec<String>, ProviderError> {
        check_paraphrase_args(question, k)?;
        let completion = self.chat(&paraphrase_prompt(question, k))?;
        let mut lines = parse_paraphrase_lines(&completion, question);
        if lines.len() < k {
            return Err(ProviderError::Degraded {
                requested: k,
                returned: lines,
            });
        }
        lines.truncate(k);
        Ok(lines)
    }

    fn generate_answer(&self, question: &str) -> Result<String, ProviderError> {
        check_question(question)?;
        self.chat(question.trim())
    }
}

pub struct OpenAiEmbedder {
    config: ProviderConfig,
    transport: Arc<dyn Transport>,
}

impl OpenAiEmbedder {
    pub fn new(config: ProviderConfig, transport: Arc<dyn Transport>) -> Self {
        Self { config, transport }
    }

    fn embed_batch(&self, batch: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let body = json!({"model": self.config.model_name, "input": batch});
        let url = endpoint(&self.config, &self.config.embeddings_path);
        let resp = post_with_retries(&self.config, self.transport.as_ref(), &url, &body)?;
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::InvalidResponse("missing 'data' array".into()))?;
        if data.len() != batch.len() {
            return Err(ProviderError::InvalidResponse(format!(
                "sent {} inputs, received {} embeddings",
                batch.len(),
                data.len()
            )));
        }
        let mut slots: Vec<Option<EmbeddingVector>> = vec![None; batch.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let values: Vec<f64> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| ProviderError::InvalidResponse("missing 'embedding'".into()))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| ProviderError::InvalidResponse("non-numeric component".into())))
                .collect::<Result<_, _>>()?;
            let slot = slots
                .get_mut(index)
                .ok_or_else(|| ProviderError::InvalidResponse(format!("embedding index {index} out of range")))?;
            *slot = Some(EmbeddingVector::new(values, self.provider_tag())?);
        }
        slots
            .into_iter()
            .map(|s| s.ok_or_else(|| ProviderError::InvalidResponse("duplicate embedding index".into())))
            .collect()
    }
}

impl Embedder for OpenAiEmbedder {
    fn identity(&self) -> Value {
        json!({
            "kind": "openai-embeddings",
            "base_url": self.config.base_url,
            "model": self.config.model_name,
        })
    }

    fn provider_tag(&self) -> String {
        format!("openai/{}", self.config.model_name)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_texts(texts)?;
        let batches: Vec<&[String]> = texts.chunks(self.config.batch_size).collect();
        let results = bounded_map(&batches, self.config.max_concurrency, |b| self.embed_batch(b));
        let mut out = Vec::with_capacity(texts.len());
        for r in results {
            out.extend(r?);
        }
        check_uniform(&out, None)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ProviderKind;
    use std::sync::Mutex;

    /// Replays canned responses and records requests.
    struct Scripted {
        responses: Mutex<Vec<Result<Value, TransportError>>>,
        requests: Mutex<Vec<(String, Value)>>,
    }

    impl Scripted {
        fn new(responses: Vec<Result<Value, TransportError>>) -> Arc<Self> {
            Arc::new(Self {
                responses: Mutex::new(responses.into_iter().rev().collect()),
                requests: Mutex::new(Vec::new()),
            })
        }
    }

    impl Transport for Scripted {
        fn post_json(&self, url: &str, key: Option<&str>, body: &Value, _: Duration) -> Result<Value, TransportError> {
            assert_eq!(key, Some("test-key"));
            self.requests.lock().unwrap().push((url.to_string(), body.clone()));
            self.responses.lock().unwrap().pop().expect("unexpected request")
        }
    }

    fn config(env: &str) -> ProviderConfig {
        std::env::set_var(env, "test-key");
        ProviderConfig {
            kind: ProviderKind::OpenAi,
            api_key_env: env.into(),
            backoff_ms: 0,
            temperature: 0.3,
            top_p: 0.9,
            ..ProviderConfig::default()
        }
    }

    fn chat_reply(text: &str) -> Result<Value, TransportError> {
        Ok(json!({"choices": [{"message": {"role": "assistant", "content": text}}]}))
    }

    #[test]
    fn forwards_sampling_parameters() {
        let t = Scripted::new(vec![chat_reply("Hackers are like computer experts.")]);
        let g = OpenAiGenerator::new(config("PP_TEST_KEY_A"), t.clone());
        assert_eq!(g.generate_answer("What do hackers do?").unwrap(), "Hackers are like computer experts.");
        let reqs = t.requests.lock().unwrap();
        assert_eq!(reqs[0].0, "https://api.openai.com/v1/chat/completions");
        assert_eq!(reqs[0].1["temperature"], 0.3);
        assert_eq!(reqs[0].1["top_p"], 0.9);
        assert_eq!(reqs[0].1["messages"][0]["content"], "What do hackers do?");
    }

    #[test]
    fn retries_then_fails_with_transport_error() {
        let t = Scripted::new(vec![
            Err(TransportError::Timeout),
            Err(TransportError::Status { status: 503, body: String::new() }),
            Err(TransportError::Timeout),
        ]);
        let g = OpenAiGenerator::new(config("PP_TEST_KEY_B"), t.clone());
        match g.generate_answer("Q?") {
            Err(ProviderError::Transport { attempts: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn retry_recovers() {
        let t = Scripted::new(vec![Err(TransportError::Timeout), chat_reply("ok")]);
        let g = OpenAiGenerator::new(config("PP_TEST_KEY_C"), t);
        assert_eq!(g.generate_answer("Q?").unwrap(), "ok");
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = Scripted::new(vec![Err(TransportError::Status { status: 401, body: "no".into() })]);
        let g = OpenAiGenerator::new(config("PP_TEST_KEY_D"), t);
        assert!(matches!(g.generate_answer("Q?"), Err(ProviderError::Transport { attempts: 1, .. })));
    }

    #[test]
    fn empty_completion() {
        let t = Scripted::new(vec![chat_reply("   ")]);
        let g = OpenAiGenerator::new(config("PP_TEST_KEY_E"), t);
        assert!(matches!(g.generate_answer("Q?"), Err(ProviderError::EmptyCompletion)));
    }

    #[test]
    fn paraphrase_parsing_and_degraded_output() {
        let t = Scripted::new(vec![
            chat_reply("1. What do hackers actually do?\n2. What are hackers up to?\n3. Why do hackers type so fast?"),
            chat_reply("1. What do hackers actually do?\n2. What do hackers actually do?"),
        ]);
        let g = OpenAiGenerator::new(config("PP_TEST_KEY_F"), t.clone());
        assert_eq!(g.paraphrase("What is a hacker doing?", 3).unwrap().len(), 3);
        let prompt = t.requests.lock().unwrap()[0].1["messages"][0]["content"].as_str().unwrap().to_string();
        assert!(prompt.contains("What is a hacker doing?"));
        match g.paraphrase("What is a hacker doing?", 3) {
            Err(ProviderError::Degraded { requested: 3, returned }) => assert_eq!(returned.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn embeddings_are_batched_and_reordered() {
        let mut cfg = config("PP_TEST_KEY_G");
        cfg.batch_size = 2;
        cfg.max_concurrency = 1;
        let t = Scripted::new(vec![
            Ok(json!({"data": [
                {"index": 1, "embedding": [0.0, 1.0]},
                {"index": 0, "embedding": [1.0, 0.0]},
            ]})),
            Ok(json!({"data": [{"index": 0, "embedding": [1.0, 1.0]}]})),
        ]);
        let e = OpenAiEmbedder::new(cfg, t.clone());
        let v = e.embed(&["a".into(), "b".into(), "c".into()]).unwrap();
        assert_eq!(v[0].values(), &[1.0, 0.0]);
        assert_eq!(v[1].values(), &[0.0, 1.0]);
        assert_eq!(v[2].values(), &[1.0, 1.0]);
        assert_eq!(t.requests.lock().unwrap().len(), 2);
    }

    #[test]
    fn embedding_dimension_mismatch() {
        let t = Scripted::new(vec![Ok(json!({"data": [
            {"index": 0, "embedding": [1.0, 0.0]},
            {"index": 1, "embedding": [1.0, 0.0, 2.0]},
        ]}))]);
        let e = OpenAiEmbedder::new(config("PP_TEST_KEY_H"), t);
        assert!(matches!(
            e.embed(&["a".into(), "b".into()]),
            Err(ProviderError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn missing_credential() {
        let cfg = ProviderConfig {
            kind: ProviderKind::OpenAi,
            api_key_env: "PP_TEST_KEY_DEFINITELY_UNSET".into(),
            ..ProviderConfig::default()
        };
        let g = OpenAiGenerator::new(cfg, Scripted::new(vec![]));
        assert!(matches!(g.generate_answer("Q?"), Err(ProviderError::MissingCredential(_))));
    }
}
