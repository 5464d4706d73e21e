//! Detection reports: a JSON document for machines and a text table for people.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::LdaModel;

pub const REPORT_SCHEMA: &str = "paraprobe.detection-report/1";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report schema error: {0}")]
    Schema(String),
    #[error("inconsistent report: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// One answer to the question as asked.
    OriginalOnly,
    /// Answers to paraphrases of the question, optionally plus the original.
    Paraphrased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedAnswer {
    /// `original` or `paraphrase-N`.
    pub variant: String,
    pub question: String,
    pub answer: String,
    pub n_sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceResult {
    pub index: usize,
    pub student_sentence: String,
    pub matched_sentence: String,
    /// Index into `answers` of the answer holding the matched sentence.
    pub matched_answer: usize,
    pub score: f64,
    pub posterior: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentResult {
    pub score: f64,
    pub n_sentences: usize,
    pub posterior: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportModels {
    pub sentence: LdaModel,
    pub document: LdaModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionReport {
    pub schema: String,
    pub question: String,
    pub student_response: String,
    pub pool_mode: PoolMode,
    pub answers: Vec<GeneratedAnswer>,
    pub sentences: Vec<SentenceResult>,
    pub document: DocumentResult,
    pub models: ReportModels,
    pub config: Value,
}

/// Posteriors are rounded to 12 decimals so that reports stay byte-identical
/// across platforms whose `exp` differs in the last ulp.
pub fn round_posterior(p: f64) -> f64 {
    (p * 1e12).round() / 1e12
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        if text.trim().is_empty() {
            return Err(ReportError::Schema("report file is empty".into()));
        }
        let raw: Value = serde_json::from_str(text).map_err(|e| ReportError::Schema(e.to_string()))?;
        match raw.get("schema").and_then(Value::as_str) {
            Some(REPORT_SCHEMA) => {}
            Some(other) => {
                return Err(ReportError::Schema(format!(
                    "unsupported schema '{other}' (expected '{REPORT_SCHEMA}')"
                )))
            }
            None => return Err(ReportError::Schema("missing 'schema' field".into())),
        }
        let report: DetectionReport =
            serde_json::from_value(raw).map_err(|e| ReportError::Schema(e.to_string()))?;
        report.validate()?;
        Ok(report)
    }

    /// Checks the internal invariants a well-formed report satisfies.
    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |m: String| Err(ReportError::Inconsistent(m));
        if self.schema != REPORT_SCHEMA {
            return Err(ReportError::Schema(format!("unsupported schema '{}'", self.schema)));
        }
        if self.sentences.is_empty() {
            return bad("no sentence results".into());
        }
        if self.answers.is_empty() {
            return bad("no generated answers".into());
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.index != i {
                return bad(format!("sentence {i} has index {}", s.index));
            }
            if s.matched_answer >= self.answers.len() {
                return bad(format!("sentence {i} points at missing answer {}", s.matched_answer));
            }
            if !(-1.0..=1.0).contains(&s.score) || !(0.0..=1.0).contains(&s.posterior) || s.label > 1 {
                return bad(format!("sentence {i} has out-of-range values"));
            }
        }
        let d = &self.document;
        if d.n_sentences != self.sentences.len() {
            return bad("document sentence count disagrees with sentence rows".into());
        }
        let sum: f64 = self.sentences.iter().map(|s| s.score).sum();
        let mean = sum / self.sentences.len() as f64;
        if (mean - d.score).abs() > 1e-12 {
            return bad(format!("document score {} is not the mean {mean}", d.score));
        }
        if !(0.0..=1.0).contains(&d.posterior) || d.label > 1 {
            return bad("document posterior or label out of range".into());
        }
        Ok(())
    }

    /// Sentence pairs ordered by descending similarity, student order breaking ties.
    pub fn ranked(&self) -> Vec<&SentenceResult> {
        let mut rows: Vec<&SentenceResult> = self.sentences.iter().collect();
        rows.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        rows
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Question: {}\n", self.question));
        out.push_str(&format!(
            "Document: score {:.4}, posterior {:.4}, label {} ({})\n",
            self.document.score,
            self.document.posterior,
            self.document.label,
            label_name(self.document.label)
        ));
        out.push_str(&format!(
            "Pool: {} answer(s), {} sentence(s)\n\n",
            self.answers.len(),
            self.answers.iter().map(|a| a.n_sentences).sum::<usize>()
        ));
        out.push_str("| LLM sentence | Student sentence | Cosine | Posterior |\n");
        out.push_str("|---|---|---|---|\n");
        for r in self.ranked() {
            out.push_str(&format!(
                "| {} | {} | {:.4} | {:.4} |\n",
                cell(&r.matched_sentence),
                cell(&r.student_sentence),
                r.score,
                r.posterior
            ));
        }
        out
    }
}

pub fn label_name(label: u8) -> &'static str {
    if label == 1 {
        "machine-like"
    } else {
        "human-like"
    }
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace(['\n', '\r'], " ")
}
