//! Content-addressed response cache.
//!
//! Layout: `<dir>/<first two hex chars>/<key>` holds the payload verbatim and
//! `<key>.meta.json` records the operation kind, provider identity and
//! creation time. Writes are atomic, so concurrent readers never see a
//! partial file; a duplicate concurrent fetch simply overwrites an equal value.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{check_paraphrase_args, check_question, check_texts, check_uniform, Embedder, Generator, ProviderError};
use crate::embedding::EmbeddingVector;
use crate::io_util::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Paraphrase,
    Generate,
    Embed,
}

impl OperationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperationKind::Paraphrase => "paraphrase",
            OperationKind::Generate => "generate",
            OperationKind::Embed => "embed",
        }
    }
}

/// Hex-encoded SHA-256 of a canonical request.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Hashes the canonical form of `(kind, payload)`: compact JSON with object
/// keys in sorted order.
pub fn cache_key(kind: OperationKind, payload: &Value) -> CacheKey {
    let canonical = serde_json::to_string(&json!({"kind": kind.as_str(), "payload": payload}))
        .expect("JSON values always serialize");
    CacheKey(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    kind: OperationKind,
    provider: Value,
    created_at_unix: u64,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(&key.0[..2]).join(&key.0)
    }

    pub fn get(&self, key: &CacheKey) -> io::Result<Option<Vec<u8>>> {
        match fs::read(self.path_for(key)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put(&self, key: &CacheKey, kind: OperationKind, provider: &Value, value: &[u8]) -> io::Result<()> {
        let path = self.path_for(key);
        fs::create_dir_all(path.parent().expect("cache entries live in a shard directory"))?;
        let meta = Meta {
            kind,
            provider: provider.clone(),
            created_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        write_atomic(&path, value)?;
        let meta_path = path.with_file_name(format!("{}.meta.json", key.0));
        write_atomic(&meta_path, &serde_json::to_vec_pretty(&meta).map_err(io::Error::from)?)
    }

    /// Returns the cached bytes for `key`, or runs `fetch`, stores and returns its result.
    pub fn get_or_fetch<F>(
        &self,
        key: &CacheKey,
        kind: OperationKind,
        provider: &Value,
        fetch: F,
    ) -> Result<Vec<u8>, ProviderError>
    where
        F: FnOnce() -> Result<Vec<u8>, ProviderError>,
    {
        if let Some(hit) = self.get(key)? {
            return Ok(hit);
        }
        let value = fetch()?;
        self.put(key, kind, provider, &value)?;
        Ok(value)
    }
}

fn corrupt(key: &CacheKey, e: impl std::fmt::Display) -> ProviderError {
    ProviderError::InvalidResponse(format!("corrupt cache entry {key}: {e}"))
}

pub struct CachedGenerator<G> {
    inner: G,
    cache: ResponseCache,
}

impl<G: Generator> CachedGenerator<G> {
    pub fn new(inner: G, cache: ResponseCache) -> Self {
        Self { inner, cache }
    }
}

impl<G: Generator> Generator for CachedGenerator<G> {
    fn identity(&self) -> Value {
        self.inner.identity()
    }

    fn paraphrase(&self, question: &str, k: usize) -> Result<Vec<String>, ProviderError> {
        check_paraphrase_args(question, k)?;
        let provider = self.identity();
        let key = cache_key(
            OperationKind::Paraphrase,
            &json!({"provider": provider, "question": question, "k": k}),
        );
        let bytes = self.cache.get_or_fetch(&key, OperationKind::Paraphrase, &provider, || {
            let v = self.inner.paraphrase(question, k)?;
            Ok(serde_json::to_vec(&v).expect("strings serialize"))
        })?;
        serde_json::from_slice(&bytes).map_err(|e| corrupt(&key, e))
    }

    fn generate_answer(&self, question: &str) -> Result<String, ProviderError> {
        check_question(question)?;
        let provider = self.identity();
        let key = cache_key(
            OperationKind::Generate,
            &json!({"provider": provider, "question": question}),
        );
        let bytes = self.cache.get_or_fetch(&key, OperationKind::Generate, &provider, || {
            Ok(self.inner.generate_answer(question)?.into_bytes())
        })?;
        String::from_utf8(bytes).map_err(|e| corrupt(&key, e))
    }
}

pub struct CachedEmbedder<E> {
    inner: E,
    cache: ResponseCache,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E, cache: ResponseCache) -> Self {
        Self { inner, cache }
    }

    fn key(&self, provider: &Value, text: &str) -> CacheKey {
        cache_key(OperationKind::Embed, &json!({"provider": provider, "text": text}))
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn identity(&self) -> Value {
        self.inner.identity()
    }

    fn provider_tag(&self) -> String {
        self.inner.provider_tag()
    }

    /// Looks every text up individually and sends only the misses to the provider.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_texts(texts)?;
        let provider = self.identity();
        let tag = self.provider_tag();
        let keys: Vec<CacheKey> = texts.iter().map(|t| self.key(&provider, t)).collect();
        let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(texts.len());
        let mut missing: Vec<usize> = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            match self.cache.get(key)? {
                Some(bytes) => {
                    let values: Vec<f64> = serde_json::from_slice(&bytes).map_err(|e| corrupt(key, e))?;
                    out.push(Some(EmbeddingVector::new(values, tag.clone())?));
                }
                None => {
                    out.push(None);
                    missing.push(i);
                }
            }
        }
        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let fetched = self.inner.embed(&batch)?;
            if fetched.len() != batch.len() {
                return Err(ProviderError::InvalidResponse(format!(
                    "asked for {} embeddings, got {}",
                    batch.len(),
                    fetched.len()
                )));
            }
            for (&i, v) in missing.iter().zip(fetched) {
                let bytes = serde_json::to_vec(v.values()).expect("finite floats serialize");
                self.cache.put(&keys[i], OperationKind::Embed, &provider, &bytes)?;
                out[i] = Some(v);
            }
        }
        let out: Vec<EmbeddingVector> = out.into_iter().map(|v| v.expect("filled above")).collect();
        check_uniform(&out, None)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockEmbedder, MockGenerator, ProviderConfig};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn request(cfg: &ProviderConfig) -> Value {
        json!({
            "provider": {"model": cfg.model_name, "temperature": cfg.temperature, "top_p": cfg.top_p},
            "question": "Q1",
        })
    }

    #[test]
    fn keys_are_deterministic_and_field_sensitive() {
        let cfg = ProviderConfig::default();
        let k1 = cache_key(OperationKind::Generate, &request(&cfg));
        assert_eq!(k1, cache_key(OperationKind::Generate, &request(&cfg)));
        assert_eq!(k1.as_str().len(), 64);

        let hotter = ProviderConfig { temperature: 0.7, ..cfg.clone() };
        assert_ne!(k1, cache_key(OperationKind::Generate, &request(&hotter)));
        let other_model = ProviderConfig { model_name: "gpt-4".into(), ..cfg.clone() };
        assert_ne!(k1, cache_key(OperationKind::Generate, &request(&other_model)));
        assert_ne!(k1, cache_key(OperationKind::Paraphrase, &request(&cfg)));
    }

    #[test]
    fn key_ignores_field_order() {
        let a: Value = serde_json::from_str(r#"{"b":1,"a":{"y":2,"x":3}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a":{"x":3,"y":2},"b":1}"#).unwrap();
        assert_eq!(cache_key(OperationKind::Embed, &a), cache_key(OperationKind::Embed, &b));
    }

    #[test]
    fn miss_fetch_store_hit() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = cache_key(OperationKind::Generate, &json!({"q": 1}));
        let calls = AtomicUsize::new(0);
        let fetch = || {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok(b"payload \xff bytes".to_vec())
        };
        let first = cache.get_or_fetch(&key, OperationKind::Generate, &json!({}), fetch).unwrap();
        let second = cache
            .get_or_fetch(&key, OperationKind::Generate, &json!({}), || panic!("should hit"))
            .unwrap();
        assert_eq!(first, second);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        let meta = dir.path().join(&key.as_str()[..2]).join(format!("{key}.meta.json"));
        assert!(meta.exists());
    }

    #[test]
    fn cached_providers_are_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let gen = MockGenerator::new(4);
        let cached = CachedGenerator::new(gen.clone(), ResponseCache::open(dir.path()).unwrap());
        for _ in 0..2 {
            assert_eq!(cached.paraphrase("How do magnets work?", 3).unwrap(), gen.paraphrase("How do magnets work?", 3).unwrap());
            assert_eq!(cached.generate_answer("How do magnets work?").unwrap(), gen.generate_answer("How do magnets work?").unwrap());
        }

        let emb = MockEmbedder::new(2, 32);
        let cached = CachedEmbedder::new(emb.clone(), ResponseCache::open(dir.path()).unwrap());
        let texts: Vec<String> = vec!["one two".into(), "three".into(), "one two".into()];
        let direct = emb.embed(&texts).unwrap();
        assert_eq!(cached.embed(&texts).unwrap(), direct);
        // Second call is served entirely from disk.
        assert_eq!(cached.embed(&texts).unwrap(), direct);
        let partial: Vec<String> = vec!["three".into(), "four five".into()];
        assert_eq!(cached.embed(&partial).unwrap(), emb.embed(&partial).unwrap());
    }
}
