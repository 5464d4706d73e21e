//! Score tables: one row per sentence best match plus one row per document.
//!
//! Written as CSV with header
//! `level,pair_id,record_id,label,sentence_index,score,side_a_sentence,side_b_sentence`.
//! Document rows leave the sentence columns empty. Scores use Rust's shortest
//! round-trip float formatting, so reading a table back yields identical values.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classifier::Level;

#[derive(Debug, thiserror::Error)]
pub enum ScoreTableError {
    #[error("score table: {0}")]
    Csv(#[from] csv::Error),
    #[error("score table row {row}: {message}")]
    Invalid { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub level: Level,
    pub pair_id: String,
    /// Rows sharing a record id always land on the same side of a split.
    pub record_id: String,
    pub label: u8,
    pub sentence_index: Option<usize>,
    pub score: f64,
    pub side_a_sentence: String,
    pub side_b_sentence: String,
}

pub fn write_score_table<W: Write>(writer: W, rows: &[ScoreRow]) -> Result<(), ScoreTableError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_score_table<R: Read>(reader: R) -> Result<Vec<ScoreRow>, ScoreTableError> {
    let mut rows = Vec::new();
    for (i, row) in csv::Reader::from_reader(reader).deserialize().enumerate() {
        let row: ScoreRow = row?;
        let invalid = |message: &str| ScoreTableError::Invalid {
            row: i + 1,
            message: message.to_string(),
        };
        if row.label > 1 {
            return Err(invalid("label must be 0 or 1"));
        }
        if !row.score.is_finite() {
            return Err(invalid("score is not finite"));
        }
        if row.level == Level::Sentence && row.sentence_index.is_none() {
            return Err(invalid("sentence row without sentence_index"));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Rows at `level`, as parallel score and label vectors.
pub fn level_columns(rows: &[ScoreRow], level: Level) -> (Vec<f64>, Vec<u8>) {
    rows.iter()
        .filter(|r| r.level == level)
        .map(|r| (r.score, r.label))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ScoreRow> {
        vec![
            ScoreRow {
                level: Level::Sentence,
                pair_id: "q1:hm".into(),
                record_id: "q1".into(),
                label: 0,
                sentence_index: Some(0),
                score: 0.1 + 0.2,
                side_a_sentence: "Commas, \"quotes\" and\nnewlines.".into(),
                side_b_sentence: "Plain.".into(),
            },
            ScoreRow {
                level: Level::Document,
                pair_id: "q1:hm".into(),
                record_id: "q1".into(),
                label: 0,
                sentence_index: None,
                score: 2.0 / 3.0,
                side_a_sentence: String::new(),
                side_b_sentence: String::new(),
            },
        ]
    }

    #[test]
    fn round_trips_exactly() {
        let mut buf = Vec::new();
        write_score_table(&mut buf, &rows()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("level,pair_id,record_id,label,sentence_index,score,side_a_sentence,side_b_sentence\n"));
        assert!(text.contains("document,q1:hm,q1,0,,0.6666666666666666,,"));
        assert_eq!(read_score_table(buf.as_slice()).unwrap(), rows());
    }

    #[test]
    fn rejects_bad_rows() {
        let header = "level,pair_id,record_id,label,sentence_index,score,side_a_sentence,side_b_sentence\n";
        for body in [
            "sentence,p,r,2,0,0.5,a,b\n",
            "sentence,p,r,0,,0.5,a,b\n",
            "paragraph,p,r,0,0,0.5,a,b\n",
            "sentence,p,r,0,0,NaN,a,b\n",
            "sentence,p,r,0,0,abc,a,b\n",
        ] {
            assert!(read_score_table(format!("{header}{body}").as_bytes()).is_err(), "{body}");
        }
    }

    #[test]
    fn selects_level() {
        let (s, l) = level_columns(&rows(), Level::Document);
        assert_eq!(s, vec![2.0 / 3.0]);
        assert_eq!(l, vec![0]);
    }
}
