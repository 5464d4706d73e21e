//! Detection of LLM-generated responses by paraphrase probing.
//!
//! A question (optionally paraphrased several ways) is answered by an LLM;
//! every sentence of a student's response is matched to its most similar
//! generated sentence by embedding cosine similarity, and a one-feature linear
//! discriminant turns sentence and document scores into probabilities of
//! machine authorship.

pub mod classifier;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod io_util;
pub mod pipeline;
pub mod providers;
pub mod report;
pub mod scores;
pub mod segmenter;
pub mod similarity;
pub mod vectorstore;

pub use embedding::{EmbeddingError, EmbeddingVector};
