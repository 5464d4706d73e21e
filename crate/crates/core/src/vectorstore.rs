//! Exact cosine top-k store with a portable binary file format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  b"PPVSTORE"
//! version    u32      FORMAT_VERSION
//! dimension  u32
//! count      u64
//! vectors    count × dimension × f32
//! metadata   u64 byte length, then a UTF-8 JSON array of StoredMeta (one per vector)
//! ```
//!
//! Components are stored as `f32`; values handed to [`VectorStore::upsert`]
//! are narrowed once on insert and round-trip bit-exactly afterwards.

use std::fs;
use std::io;
use std::path::Path;
use std::sync::{PoisonError, RwLock};

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::io_util::write_atomic;
use crate::similarity::cosine_slices;

pub const MAGIC: &[u8; 8] = b"PPVSTORE";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("dimension mismatch: store has {store}, vector has {vector}")]
    DimensionMismatch { store: usize, vector: usize },
    #[error("store is empty")]
    Empty,
    #[error("k must be positive")]
    ZeroK,
    #[error("not a vector store file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported store format version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("store file truncated: {0}")]
    Truncated(&'static str),
    #[error("corrupt store file: {0}")]
    Corrupt(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Human,
    Machine,
    Student,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredMeta {
    pub doc_id: String,
    pub sentence_index: usize,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub vector_id: u64,
    pub score: f64,
    pub metadata: StoredMeta,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorStore {
    dimension: Option<usize>,
    data: Vec<f32>,
    meta: Vec<StoredMeta>,
}

impl VectorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    /// Inserts a vector and returns its id. The first insert fixes the dimension.
    pub fn upsert(
        &mut self,
        embedding: &EmbeddingVector,
        metadata: StoredMeta,
    ) -> Result<u64, StoreError> {
        let dim = embedding.dimension();
        if let Some(d) = self.dimension {
            if d != dim {
                return Err(StoreError::DimensionMismatch { store: d, vector: dim });
            }
        }
        let narrowed: Vec<f32> = embedding.values().iter().map(|&v| v as f32).collect();
        let norm = norm_f32(&narrowed);
        if norm == 0.0 || !norm.is_finite() {
            return Err(StoreError::Corrupt(
                "embedding collapses to zero or overflows as f32".into(),
            ));
        }
        self.dimension = Some(dim);
        self.data.extend_from_slice(&narrowed);
        self.meta.push(metadata);
        Ok((self.meta.len() - 1) as u64)
    }

    pub fn get(&self, vector_id: u64) -> Option<(&[f32], &StoredMeta)> {
        let i = usize::try_from(vector_id).ok()?;
        let dim = self.dimension?;
        let meta = self.meta.get(i)?;
        Some((&self.data[i * dim..(i + 1) * dim], meta))
    }

    /// Exact cosine ranking (the stored `f32` components widened to `f64`);
    /// ties are broken by ascending id.
    pub fn top_k(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: Option<&dyn Fn(&StoredMeta) -> bool>,
    ) -> Result<Vec<Match>, StoreError> {
        if k == 0 {
            return Err(StoreError::ZeroK);
        }
        let dim = self.dimension.ok_or(StoreError::Empty)?;
        if query.dimension() != dim {
            return Err(StoreError::DimensionMismatch {
                store: dim,
                vector: query.dimension(),
            });
        }
        let q = query.values();
        let mut row64 = vec![0.0f64; dim];
        let mut scored: Vec<(u64, f64)> = Vec::with_capacity(self.meta.len());
        for (i, m) in self.meta.iter().enumerate() {
            if !filter.is_none_or(|f| f(m)) {
                continue;
            }
            for (dst, &src) in row64.iter_mut().zip(&self.data[i * dim..(i + 1) * dim]) {
                *dst = f64::from(src);
            }
            let score = cosine_slices(&row64, q).map_err(|e| StoreError::Corrupt(e.to_string()))?;
            scored.push((i as u64, score));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(id, score)| Match {
                vector_id: id,
                score,
                metadata: self.meta[id as usize].clone(),
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.dimension.unwrap_or(0);
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.meta.len() as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        if bytes.len() < MAGIC.len() {
            return Err(StoreError::Truncated("header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(StoreError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(StoreError::Truncated("header"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(StoreError::Version(version));
        }
        let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let count = usize::try_from(count).map_err(|_| StoreError::Corrupt("count".into()))?;
        if count > 0 && dim == 0 {
            return Err(StoreError::Corrupt("zero dimension with vectors present".into()));
        }
        let floats = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| StoreError::Corrupt("vector block size overflows".into()))?;
        let mut pos = HEADER_LEN;
        let block = bytes
            .get(pos..pos + floats)
            .ok_or(StoreError::Truncated("vector block"))?;
        let data: Vec<f32> = block
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += floats;
        let meta_len = bytes
            .get(pos..pos + 8)
            .ok_or(StoreError::Truncated("metadata length"))?;
        let meta_len = u64::from_le_bytes(meta_len.try_into().unwrap()) as usize;
        pos += 8;
        let meta_bytes = bytes
            .get(pos..pos + meta_len)
            .ok_or(StoreError::Truncated("metadata block"))?;
        if pos + meta_len != bytes.len() {
            return Err(StoreError::Corrupt("trailing bytes after metadata".into()));
        }
        let meta: Vec<StoredMeta> =
            serde_json::from_slice(meta_bytes).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        if meta.len() != count {
            return Err(StoreError::Corrupt(format!(
                "{} metadata entries for {count} vectors",
                meta.len()
            )));
        }
        if dim > 0 && data.chunks_exact(dim).map(norm_f32).any(|n| n == 0.0 || !n.is_finite()) {
            return Err(StoreError::Corrupt("zero-norm or non-finite vector".into()));
        }
        Ok(Self {
            dimension: (count > 0).then_some(dim),
            data,
            meta,
        })
    }

    /// Writes the store atomically (temp file, then rename).
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        write_atomic(path, &self.to_bytes()).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let bytes = fs::read(path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

fn norm_f32(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// A store shared between threads: many concurrent readers, serialized
/// writers. A query sees the store either before or after an insert.
#[derive(Debug, Default)]
pub struct SharedVectorStore {
    inner: RwLock<VectorStore>,
}

impl SharedVectorStore {
    pub fn new(store: VectorStore) -> Self {
        Self {
            inner: RwLock::new(store),
        }
    }

    pub fn upsert(&self, embedding: &EmbeddingVector, metadata: StoredMeta) -> Result<u64, StoreError> {
        self.inner
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .upsert(embedding, metadata)
    }

    pub fn top_k(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: Option<&dyn Fn(&StoredMeta) -> bool>,
    ) -> Result<Vec<Match>, StoreError> {
        self.inner
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .top_k(query, k, filter)
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap_or_else(PoisonError::into_inner).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_inner(self) -> VectorStore {
        self.inner.into_inner().unwrap_or_else(PoisonError::into_inner)
    }
}
