//! End-to-end operations: scoring comparison pairs, fitting classifiers and
//! analysing a student response.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::{
    class_stats, confusion, fit_lda, kde, metrics, sweep_threshold, ClassStats, ClassifierError,
    ConfusionMatrix, KdeCurve, LdaModel, Level, Metrics,
};
use crate::corpus::{split_items, ComparisonPair, CorpusError, PairLabel, SplitSpec};
use crate::io_util::write_atomic;
use crate::providers::{bounded_map, Embedder, Generator, ProviderError};
use crate::report::{
    round_posterior, DetectionReport, DocumentResult, GeneratedAnswer, PoolMode, ReportError,
    ReportModels, SentenceResult, REPORT_SCHEMA,
};
use crate::scores::{level_columns, ScoreRow, ScoreTableError};
use crate::segmenter::{segment, Sentence};
use crate::similarity::{best_matches, document_score, SimilarityError};
use crate::vectorstore::{Origin, StoreError, StoredMeta, VectorStore};
use crate::EmbeddingVector;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    ScoreTable(#[from] ScoreTableError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

// ---------------------------------------------------------------- scoring

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFailure {
    pub pair_id: String,
    pub reason: String,
    /// The provider could not be reached, as opposed to unusable pair data.
    pub transport: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ScoringOutcome {
    pub rows: Vec<ScoreRow>,
    pub failures: Vec<PairFailure>,
}

fn sentence_texts(sentences: &[Sentence]) -> Vec<String> {
    sentences.iter().map(|s| s.text.clone()).collect()
}

fn upsert_all(
    store: &mut VectorStore,
    sentences: &[Sentence],
    vectors: &[EmbeddingVector],
    origin: Origin,
) -> Result<(), StoreError> {
    for (s, v) in sentences.iter().zip(vectors) {
        store.upsert(
            v,
            StoredMeta {
                doc_id: s.doc_id.clone(),
                sentence_index: s.index,
                origin,
            },
        )?;
    }
    Ok(())
}

/// Scores one pair: every `side_a` sentence is matched against the `side_b` sentences.
pub fn score_pair(
    pair: &ComparisonPair,
    embedder: &dyn Embedder,
    store: Option<&mut VectorStore>,
) -> Result<Vec<ScoreRow>, PipelineError> {
    let pair_id = pair.pair_id();
    let a = segment(&format!("{pair_id}/a"), &pair.side_a);
    let b = segment(&format!("{pair_id}/b"), &pair.side_b);
    if a.is_empty() || b.is_empty() {
        return Err(PipelineError::Data("a side has no sentences".into()));
    }
    let mut texts = sentence_texts(&a);
    texts.extend(sentence_texts(&b));
    let mut vectors = embedder.embed(&texts)?;
    let b_vectors = vectors.split_off(a.len());
    let matches = best_matches(&a, &vectors, &b, &b_vectors)?;
    let doc = document_score(&matches)?;

    if let Some(store) = store {
        let a_origin = match pair.label {
            PairLabel::Hm => Origin::Human,
            PairLabel::Mm => Origin::Machine,
        };
        upsert_all(store, &a, &vectors, a_origin)?;
        upsert_all(store, &b, &b_vectors, Origin::Machine)?;
    }

    let label = pair.label.as_u8();
    let mut rows: Vec<ScoreRow> = matches
        .iter()
        .map(|m| ScoreRow {
            level: Level::Sentence,
            pair_id: pair_id.clone(),
            record_id: pair.record_id.clone(),
            label,
            sentence_index: Some(m.student_sentence.index),
            score: m.score,
            side_a_sentence: m.student_sentence.text.clone(),
            side_b_sentence: m.matched_sentence.text.clone(),
        })
        .collect();
    rows.push(ScoreRow {
        level: Level::Document,
        pair_id,
        record_id: pair.record_id.clone(),
        label,
        sentence_index: None,
        score: doc.value,
        side_a_sentence: String::new(),
        side_b_sentence: String::new(),
    });
    Ok(rows)
}

/// Scores every pair in order. Pairs that cannot be scored, for whatever
/// reason, are listed in `failures` and the run continues.
pub fn score_pairs(
    pairs: &[ComparisonPair],
    embedder: &dyn Embedder,
    mut store: Option<&mut VectorStore>,
) -> ScoringOutcome {
    let mut out = ScoringOutcome::default();
    for pair in pairs {
        match score_pair(pair, embedder, store.as_deref_mut()) {
            Ok(rows) => out.rows.extend(rows),
            Err(e) => {
                log::warn!("skipping pair {}: {e}", pair.pair_id());
                out.failures.push(PairFailure {
                    pair_id: pair.pair_id(),
                    reason: e.to_string(),
                    transport: matches!(&e, PipelineError::Provider(p) if p.is_transport()),
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------- fitting

pub const MODEL_SCHEMA: &str = "paraprobe.lda-model/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub level: Level,
    pub split: SplitSpec,
    pub sweep_step: f64,
    pub positive: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProvenance {
    pub level: Level,
    pub n_train: usize,
    pub n_test: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub sweep_step: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_table: Option<String>,
}

/// On-disk form of a fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: String,
    pub model: LdaModel,
    /// Absent for hand-written models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<FitProvenance>,
}

impl ModelFile {
    pub fn new(model: LdaModel, provenance: Option<FitProvenance>) -> Self {
        Self {
            schema: MODEL_SCHEMA.into(),
            model,
            provenance,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("models serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| PipelineError::Data(format!("invalid model file: {e}")))?;
        if file.schema != MODEL_SCHEMA {
            return Err(PipelineError::Data(format!(
                "unsupported model schema '{}' (expected '{MODEL_SCHEMA}')",
                file.schema
            )));
        }
        file.model.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        write_atomic(path, self.to_json().as_bytes()).map_err(|e| PipelineError::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub file: ModelFile,
    /// Descriptive statistics over all rows at the level.
    pub class_stats: [ClassStats; 2],
    /// `None` for a class whose scores are too few or all equal.
    pub kde: [Option<KdeCurve>; 2],
    pub test_confusion: ConfusionMatrix,
    pub test_metrics: Metrics,
}

/// Splits rows into train/test by record id, so that every row derived from
/// one question lands on the same side.
pub fn split_rows(rows: &[ScoreRow], spec: &SplitSpec) -> Result<(Vec<ScoreRow>, Vec<ScoreRow>), PipelineError> {
    let mut seen = BTreeSet::new();
    let groups: Vec<&str> = rows
        .iter()
        .map(|r| r.record_id.as_str())
        .filter(|id| seen.insert(*id))
        .collect();
    let (train_ids, _) = split_items(&groups, spec)?;
    let train_ids: BTreeSet<&str> = train_ids.into_iter().collect();
    Ok(rows
        .iter()
        .cloned()
        .partition(|r| train_ids.contains(r.record_id.as_str())))
}

/// Fits on the training split, picks the threshold on the training split and
/// evaluates on the held-out split.
pub fn fit(rows: &[ScoreRow], opts: &FitOptions) -> Result<FitReport, PipelineError> {
    let level_rows: Vec<ScoreRow> = rows.iter().filter(|r| r.level == opts.level).cloned().collect();
    if level_rows.is_empty() {
        return Err(PipelineError::Data(format!("no {}-level rows in score table", opts.level.as_str())));
    }
    let (train, test) = split_rows(&level_rows, &opts.split)?;
    if test.is_empty() {
        return Err(PipelineError::Data(
            "held-out split is empty; more records are needed".into(),
        ));
    }
    let (train_s, train_l) = level_columns(&train, opts.level);
    let (test_s, test_l) = level_columns(&test, opts.level);

    let mut model = fit_lda(&train_s, &train_l, opts.level)?;
    let sweep = sweep_threshold(&mut model, &train_s, &train_l, opts.sweep_step)?;
    let predictions: Vec<u8> = test_s.iter().map(|&s| model.classify(s)).collect();
    let cm = confusion(&test_l, &predictions)?;
    let test_metrics = metrics(&cm, opts.positive)?;

    let (all_s, all_l) = level_columns(&level_rows, opts.level);
    let stats = class_stats(&all_s, &all_l)?;
    let class_kde = |c: u8| {
        let xs: Vec<f64> = all_s.iter().zip(&all_l).filter(|(_, &l)| l == c).map(|(&s, _)| s).collect();
        match kde(&xs, None) {
            Ok(curve) => Some(curve),
            Err(e) => {
                log::warn!("no density estimate for class {c}: {e}");
                None
            }
        }
    };

    Ok(FitReport {
        file: ModelFile::new(
            model,
            Some(FitProvenance {
                level: opts.level,
                n_train: train_s.len(),
                n_test: test_s.len(),
                train_fraction: opts.split.train_fraction,
                seed: opts.split.seed,
                sweep_step: opts.sweep_step,
                train_accuracy: sweep.accuracy,
                test_accuracy: test_metrics.accuracy,
                score_table: None,
            }),
        ),
        class_stats: stats,
        kde: [class_kde(0), class_kde(1)],
        test_confusion: cm,
        test_metrics,
    })
}

impl FitReport {
    pub fn stats_csv(&self) -> String {
        let mut s = String::from("class,n,mean,std_dev\n");
        for (c, st) in self.class_stats.iter().enumerate() {
            s.push_str(&format!("{c},{},{},{}\n", st.n, st.mean, st.std_dev));
        }
        s
    }

    pub fn kde_csv(&self) -> String {
        let mut s = String::from("class,x,density\n");
        for (c, curve) in self.kde.iter().enumerate() {
            if let Some(curve) = curve {
                for (x, d) in curve.grid.iter().zip(&curve.density) {
                    s.push_str(&format!("{c},{x},{d}\n"));
                }
            }
        }
        s
    }

    pub fn confusion_csv(&self) -> String {
        let cm = &self.test_confusion;
        format!(
            "actual,predicted_0,predicted_1\n0,{},{}\n1,{},{}\n",
            cm.tn, cm.fp, cm.fn_, cm.tp
        )
    }

    pub fn metrics_csv(&self) -> String {
        let m = &self.test_metrics;
        format!(
            "positive,precision,recall,f1,accuracy,precision_undefined,recall_undefined,f1_undefined\n{},{},{},{},{},{},{},{}\n",
            m.positive, m.precision, m.recall, m.f1, m.accuracy, m.precision_undefined, m.recall_undefined, m.f1_undefined
        )
    }
}

// ---------------------------------------------------------------- detection

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub k: usize,
    pub use_paraphrasing: bool,
    pub include_original: bool,
    pub max_concurrency: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            k: crate::providers::DEFAULT_PARAPHRASE_COUNT,
            use_paraphrasing: false,
            include_original: true,
            max_concurrency: 4,
        }
    }
}

pub struct Detector<'a> {
    pub paraphraser: &'a dyn Generator,
    pub generator: &'a dyn Generator,
    pub embedder: &'a dyn Embedder,
    pub sentence_model: &'a LdaModel,
    pub document_model: &'a LdaModel,
    pub options: DetectOptions,
    /// Copied into the report so that it records how it was produced.
    pub config: Value,
}

impl Detector<'_> {
    fn check_models(&self) -> Result<(), PipelineError> {
        self.sentence_model.validate()?;
        self.document_model.validate()?;
        if self.sentence_model.level != Level::Sentence || self.document_model.level != Level::Document {
            return Err(PipelineError::Data(
                "sentence and document models were swapped or fitted at the wrong level".into(),
            ));
        }
        Ok(())
    }

    /// The `(variant, question)` list whose answers form the comparison pool.
    fn question_variants(&self, question: &str) -> Result<Vec<(String, String)>, PipelineError> {
        let o = &self.options;
        let mut variants = Vec::new();
        if !o.use_paraphrasing || o.include_original {
            variants.push(("original".to_string(), question.to_string()));
        }
        if o.use_paraphrasing {
            let paraphrases = match self.paraphraser.paraphrase(question, o.k) {
                Ok(p) => p,
                Err(ProviderError::Degraded { requested, returned }) if !returned.is_empty() => {
                    log::warn!("using {} of {requested} requested paraphrases", returned.len());
                    returned
                }
                Err(e) => return Err(e.into()),
            };
            for (i, p) in paraphrases.into_iter().enumerate() {
                variants.push((format!("paraphrase-{}", i + 1), p));
            }
        }
        Ok(variants)
    }

    pub fn detect(
        &self,
        question: &str,
        student_response: &str,
        store: Option<&mut VectorStore>,
    ) -> Result<DetectionReport, PipelineError> {
        self.check_models()?;
        if question.trim().is_empty() {
            return Err(PipelineError::Data("question is empty".into()));
        }
        let student = segment("student", student_response);
        if student.is_empty() {
            return Err(PipelineError::Data("student response has no sentences".into()));
        }

        let variants = self.question_variants(question)?;
        let generated = bounded_map(&variants, self.options.max_concurrency, |(_, q)| {
            self.generator.generate_answer(q)
        });
        let mut answers = Vec::with_capacity(variants.len());
        let mut pool: Vec<Sentence> = Vec::new();
        let mut pool_owner: HashMap<String, usize> = HashMap::new();
        for (i, ((variant, q), answer)) in variants.into_iter().zip(generated).enumerate() {
            let answer = answer?;
            let sentences = segment(&variant, &answer);
            pool_owner.insert(variant.clone(), i);
            answers.push(GeneratedAnswer {
                variant,
                question: q,
                answer,
                n_sentences: sentences.len(),
            });
            pool.extend(sentences);
        }
        if pool.is_empty() {
            return Err(PipelineError::Data("generated answers contain no sentences".into()));
        }

        let mut texts = sentence_texts(&pool);
        texts.extend(sentence_texts(&student));
        let mut pool_vectors = self.embedder.embed(&texts)?;
        let student_vectors = pool_vectors.split_off(pool.len());
        let matches = best_matches(&student, &student_vectors, &pool, &pool_vectors)?;
        let doc = document_score(&matches)?;

        if let Some(store) = store {
            upsert_all(store, &pool, &pool_vectors, Origin::Machine)?;
            upsert_all(store, &student, &student_vectors, Origin::Student)?;
        }

        let sentences = matches
            .iter()
            .map(|m| SentenceResult {
                index: m.student_sentence.index,
                student_sentence: m.student_sentence.text.clone(),
                matched_sentence: m.matched_sentence.text.clone(),
                matched_answer: pool_owner[&m.matched_sentence.doc_id],
                score: m.score,
                posterior: round_posterior(self.sentence_model.posterior(m.score)),
                label: self.sentence_model.classify(m.score),
            })
            .collect();
        let report = DetectionReport {
            schema: REPORT_SCHEMA.into(),
            question: question.to_string(),
            student_response: student_response.to_string(),
            pool_mode: if self.options.use_paraphrasing {
                PoolMode::Paraphrased
            } else {
                PoolMode::OriginalOnly
            },
            answers,
            sentences,
            document: DocumentResult {
                score: doc.value,
                n_sentences: doc.n_sentences,
                posterior: round_posterior(self.document_model.posterior(doc.value)),
                label: self.document_model.classify(doc.value),
            },
            models: ReportModels {
                sentence: self.sentence_model.clone(),
                document: self.document_model.clone(),
            },
            config: self.config.clone(),
        };
        report.validate()?;
        Ok(report)
    }
}
