//! Run configuration, stored as TOML.
//!
//! ```toml
//! version = 1
//! k = 3
//! use_paraphrasing = true
//!
//! [split]
//! train_fraction = 0.8
//! seed = 42
//!
//! [paths]
//! cache_dir = "cache"
//!
//! [providers.generation]
//! kind = "openai"
//! model_name = "gpt-3.5-turbo"
//! temperature = 0.7
//! ```
//!
//! Every field is optional; omitted fields take the defaults below, which run
//! fully offline with the mock providers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::corpus::SplitSpec;
use crate::providers::{ProviderConfig, DEFAULT_PARAPHRASE_COUNT, PARAPHRASE_PROMPT_VERSION};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported config version {0} (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderRoles {
    pub paraphrase: ProviderConfig,
    pub generation: ProviderConfig,
    #[serde(deserialize_with = "embedding_role")]
    pub embedding: ProviderConfig,
}

/// Like the derived impl, but omitted fields fall back to the embedding
/// defaults rather than the chat defaults.
fn embedding_role<'de, D: serde::Deserializer<'de>>(d: D) -> Result<ProviderConfig, D::Error> {
    use serde::de::Error;
    let given = match Value::deserialize(d)? {
        Value::Object(map) => map,
        _ => return Err(D::Error::custom("providers.embedding must be a table")),
    };
    let Value::Object(mut merged) = serde_json::to_value(ProviderConfig::embedding_default()).map_err(D::Error::custom)? else {
        unreachable!("structs serialize to objects");
    };
    for (k, v) in given {
        merged.insert(k, v);
    }
    serde_json::from_value(Value::Object(merged)).map_err(D::Error::custom)
}

impl Default for ProviderRoles {
    fn default() -> Self {
        Self {
            paraphrase: ProviderConfig::default(),
            generation: ProviderConfig::default(),
            embedding: ProviderConfig::embedding_default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector_store: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentence_model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub document_model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Number of paraphrases per question.
    pub k: usize,
    /// `false` answers only the original question; `true` adds `k` paraphrases.
    pub use_paraphrasing: bool,
    /// Whether the original question's answer joins the pool when paraphrasing.
    pub include_original: bool,
    pub sweep_step: f64,
    /// Class treated as positive when computing precision/recall/F1.
    pub positive_class: u8,
    pub split: SplitSpec,
    pub paths: Paths,
    pub providers: ProviderRoles,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            k: DEFAULT_PARAPHRASE_COUNT,
            use_paraphrasing: false,
            include_original: true,
            sweep_step: crate::classifier::DEFAULT_SWEEP_STEP,
            positive_class: 0,
            split: SplitSpec::default(),
            paths: Paths::default(),
            providers: ProviderRoles::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Loads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.paths.resolve_against(base);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        if self.k == 0 {
            return Err(ConfigError::Invalid("k must be positive".into()));
        }
        if self.use_paraphrasing || self.include_original {
        } else {
            return Err(ConfigError::Invalid(
                "include_original = false requires use_paraphrasing = true".into(),
            ));
        }
        crate::classifier::threshold_grid(self.sweep_step)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.positive_class > 1 {
            return Err(ConfigError::Invalid("positive_class must be 0 or 1".into()));
        }
        self.split
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (role, p) in [
            ("paraphrase", &self.providers.paraphrase),
            ("generation", &self.providers.generation),
            ("embedding", &self.providers.embedding),
        ] {
            p.validate()
                .map_err(|e| ConfigError::Invalid(format!("providers.{role}: {e}")))?;
        }
        Ok(())
    }

    /// Settings that determine detection outputs, excluding file locations.
    pub fn fingerprint(&self) -> Value {
        let role = |p: &ProviderConfig| {
            json!({
                "kind": p.kind,
                "model": p.model_name,
                "base_url": p.base_url,
                "temperature": p.temperature,
                "top_p": p.top_p,
                "seed": p.seed,
                "dimension": p.dimension,
            })
        };
        let body = json!({
            "config_version": self.version,
            "k": self.k,
            "use_paraphrasing": self.use_paraphrasing,
            "include_original": self.include_original,
            "paraphrase_prompt": PARAPHRASE_PROMPT_VERSION,
            "providers": {
                "paraphrase": role(&self.providers.paraphrase),
                "generation": role(&self.providers.generation),
                "embedding": role(&self.providers.embedding),
            },
        });
        let digest = hex::encode(Sha256::digest(body.to_string().as_bytes()));
        json!({"settings": body, "digest": digest})
    }
}

impl Paths {
    fn resolve_against(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.cache_dir,
            &mut self.vector_store,
            &mut self.sentence_model,
            &mut self.document_model,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
