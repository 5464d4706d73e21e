//! Cosine similarity, per-sentence best matches and document aggregation.
//!
//! Student sentences are rows, pool sentences (from every generated answer)
//! are columns. Each student sentence keeps its single best-matching pool
//! sentence; the document score is the mean of those row maxima.

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::segmenter::Sentence;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimilarityError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("at ({row}, {col}): {source}")]
    At {
        row: usize,
        col: usize,
        #[source]
        source: Box<SimilarityError>,
    },
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("{what}: {sentences} sentences but {embeddings} embeddings")]
    Misaligned {
        what: &'static str,
        sentences: usize,
        embeddings: usize,
    },
}

/// `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, SimilarityError> {
    cosine_slices(u.values(), v.values())
}

pub(crate) fn cosine_slices(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    // sqrt(x * x) == x exactly, so identical vectors score exactly 1.
    let product = nu * nv;
    let denom = if product.is_normal() {
        product.sqrt()
    } else {
        nu.sqrt() * nv.sqrt()
    };
    Ok((dot / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.scores[row * self.cols..(row + 1) * self.cols]
    }

    pub fn transpose(&self) -> SimilarityMatrix {
        let mut scores = Vec::with_capacity(self.scores.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                scores.push(self.get(r, c));
            }
        }
        SimilarityMatrix {
            rows: self.cols,
            cols: self.rows,
            scores,
        }
    }

    /// Column index of the row maximum; ties go to the lowest index.
    pub fn row_argmax(&self, row: usize) -> (usize, f64) {
        let mut best = (0, self.get(row, 0));
        for (j, &s) in self.row(row).iter().enumerate().skip(1) {
            if s > best.1 {
                best = (j, s);
            }
        }
        best
    }
}

pub fn similarity_matrix(
    a: &[EmbeddingVector],
    b: &[EmbeddingVector],
) -> Result<SimilarityMatrix, SimilarityError> {
    if a.is_empty() {
        return Err(SimilarityError::Empty("left embedding list"));
    }
    if b.is_empty() {
        return Err(SimilarityError::Empty("right embedding list"));
    }
    let mut scores = Vec::with_capacity(a.len() * b.len());
    for (row, u) in a.iter().enumerate() {
        for (col, v) in b.iter().enumerate() {
            let s = cosine(u, v).map_err(|e| SimilarityError::At {
                row,
                col,
                source: Box::new(e),
            })?;
            scores.push(s);
        }
    }
    Ok(SimilarityMatrix {
        rows: a.len(),
        cols: b.len(),
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestMatch {
    pub student_sentence: Sentence,
    pub matched_sentence: Sentence,
    /// Position of the matched sentence in the pool.
    pub pool_index: usize,
    pub score: f64,
}

pub fn best_matches(
    student: &[Sentence],
    student_embeddings: &[EmbeddingVector],
    pool: &[Sentence],
    pool_embeddings: &[EmbeddingVector],
) -> Result<Vec<BestMatch>, SimilarityError> {
    if student.is_empty() {
        return Err(SimilarityError::Empty("student sentence list"));
    }
    if pool.is_empty() {
        return Err(SimilarityError::Empty("sentence pool"));
    }
    if student.len() != student_embeddings.len() {
        return Err(SimilarityError::Misaligned {
            what: "student",
            sentences: student.len(),
            embeddings: student_embeddings.len(),
        });
    }
    if pool.len() != pool_embeddings.len() {
        return Err(SimilarityError::Misaligned {
            what: "pool",
            sentences: pool.len(),
            embeddings: pool_embeddings.len(),
        });
    }
    let matrix = similarity_matrix(student_embeddings, pool_embeddings)?;
    Ok(student
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (j, score) = matrix.row_argmax(i);
            BestMatch {
                student_sentence: s.clone(),
                matched_sentence: pool[j].clone(),
                pool_index: j,
                score,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub value: f64,
    pub n_sentences: usize,
}

pub fn document_score(matches: &[BestMatch]) -> Result<DocumentScore, SimilarityError> {
    let scores: Vec<f64> = matches.iter().map(|m| m.score).collect();
    mean_score(&scores)
}

/// Arithmetic mean of best-match scores, summed in order.
pub fn mean_score(scores: &[f64]) -> Result<DocumentScore, SimilarityError> {
    if scores.is_empty() {
        return Err(SimilarityError::Empty("best-match list"));
    }
    let sum: f64 = scores.iter().sum();
    Ok(DocumentScore {
        value: sum / scores.len() as f64,
        n_sentences: scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::from_values(values.to_vec()).unwrap()
    }

    fn sent(doc: &str, i: usize, text: &str) -> Sentence {
        Sentence {
            doc_id: doc.into(),
            index: i,
            text: text.into(),
            span: (0, text.len()),
        }
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((cosine(&v(&[3.0, 4.0]), &v(&[4.0, 3.0])).unwrap() - 0.96).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine(&v(&[1.0, 0.0]), &v(&[1.0, 0.0, 0.0])),
            Err(SimilarityError::DimensionMismatch { left: 2, right: 3 })
        );
        assert_eq!(cosine_slices(&[0.0, 0.0], &[1.0, 0.0]), Err(SimilarityError::ZeroNorm));
    }

    #[test]
    fn matrix_shape_and_transpose() {
        let a = vec![v(&[1.0, 0.0])];
        let b = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let m = similarity_matrix(&a, &b).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0]);

        let a = vec![v(&[1.0, 2.0]), v(&[-1.0, 0.5])];
        let b = vec![v(&[0.3, 2.0]), v(&[1.0, 1.0]), v(&[-2.0, 0.1])];
        let ab = similarity_matrix(&a, &b).unwrap();
        assert_eq!((ab.rows(), ab.cols()), (2, 3));
        assert_eq!(similarity_matrix(&b, &a).unwrap(), ab.transpose());
    }

    #[test]
    fn matrix_error_location() {
        let a = vec![v(&[1.0, 0.0])];
        let b = vec![v(&[1.0, 0.0]), v(&[1.0, 0.0, 1.0])];
        match similarity_matrix(&a, &b) {
            Err(SimilarityError::At { row: 0, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn best_match_tie_goes_to_lowest_index() {
        // Pool scores against the query [1,0]: 0.3, 0.9, 0.9.
        let q = vec![v(&[1.0, 0.0])];
        let unit = |c: f64| v(&[c, (1.0 - c * c).sqrt()]);
        let pool_emb = vec![unit(0.3), unit(0.9), unit(0.9)];
        let pool: Vec<_> = (0..3).map(|i| sent("a", i, "p")).collect();
        let m = best_matches(&[sent("s", 0, "q")], &q, &pool, &pool_emb).unwrap();
        assert_eq!(m[0].pool_index, 1);
        assert!((m[0].score - 0.9).abs() < 1e-12);
    }

    #[test]
    fn best_match_errors() {
        let s = vec![sent("s", 0, "q")];
        let e = vec![v(&[1.0])];
        assert_eq!(
            best_matches(&s, &e, &[], &[]),
            Err(SimilarityError::Empty("sentence pool"))
        );
        assert!(matches!(
            best_matches(&s, &[], &s, &e),
            Err(SimilarityError::Misaligned { .. })
        ));
    }

    #[test]
    fn table7_row_is_representable() {
        let m = BestMatch {
            student_sentence: sent(
                "H1",
                7,
                "Real computer hacking involves staring at a computer screen for hours of a time.",
            ),
            matched_sentence: sent(
                "A1",
                1,
                "Hacking can involve a lot of typing and computer use, because hackers often use special software and programs to try to find weaknesses in a system or network.",
            ),
            pool_index: 1,
            score: 0.8846,
        };
        let back: BestMatch = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn document_score_means() {
        assert_eq!(mean_score(&[0.8]).unwrap().value, 0.8);
        assert!((mean_score(&[0.7, 0.9]).unwrap().value - 0.8).abs() < 1e-15);
        assert_eq!(mean_score(&[]), Err(SimilarityError::Empty("best-match list")));
        assert!(document_score(&[]).is_err());
    }

    fn arb_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, dim)
            .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn document_score_is_bounded_by_row_maxima(scores in prop::collection::vec(-1.0f64..1.0, 1..30)) {
            let d = mean_score(&scores).unwrap().value;
            let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(d >= lo - 1e-15 && d <= hi + 1e-15);
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(
            (u, w) in (1usize..16).prop_flat_map(|d| (arb_vec(d), arb_vec(d))),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            let (u, w) = (v(&u), v(&w));
            let c = cosine(&u, &w).unwrap();
            prop_assert_eq!(c, cosine(&w, &u).unwrap());
            let scaled = cosine(&u.scaled(a).unwrap(), &w.scaled(b).unwrap()).unwrap();
            prop_assert!((scaled - c).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn self_similarity_is_exactly_one(u in (1usize..64).prop_flat_map(arb_vec)) {
            let u = v(&u);
            prop_assert_eq!(cosine(&u, &u).unwrap(), 1.0);
        }
    }
}
