//! Corpus ingestion, HM/MM pair construction and reproducible splits.
//!
//! Canonical corpus files are UTF-8 JSON lines, one [`QARecord`] per line:
//!
//! ```text
//! {"id":"q1","question":"...","human_answers":["..."],"machine_answers":["...","..."],"source":"hc3"}
//! ```

use std::collections::HashSet;
use std::io::{BufRead, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {id}: {message}")]
    Validation { id: String, message: String },
    #[error("duplicate record id '{0}'")]
    DuplicateId(String),
    #[error("record {0} has no machine answers and cannot be paired")]
    Unpairable(String),
    #[error("{0}")]
    InvalidSplit(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Hc3,
    WikiIntro,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QARecord {
    pub id: String,
    pub question: String,
    pub human_answers: Vec<String>,
    pub machine_answers: Vec<String>,
    pub source: Source,
}

impl QARecord {
    /// Trims every text and checks the record invariants.
    pub fn validated(mut self) -> Result<Self, CorpusError> {
        let invalid = |id: &str, message: String| CorpusError::Validation {
            id: id.to_string(),
            message,
        };
        self.id = self.id.trim().to_string();
        if self.id.is_empty() {
            return Err(invalid("<unnamed>", "empty id".into()));
        }
        self.question = self.question.trim().to_string();
        if self.question.is_empty() {
            return Err(invalid(&self.id, "empty question".into()));
        }
        for (kind, answers) in [
            ("human", &mut self.human_answers),
            ("machine", &mut self.machine_answers),
        ] {
            for (i, a) in answers.iter_mut().enumerate() {
                *a = a.trim().to_string();
                if a.is_empty() {
                    return Err(invalid(&self.id, format!("{kind} answer {i} is empty")));
                }
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PairLabel {
    Hm,
    Mm,
}

impl PairLabel {
    pub fn as_u8(self) -> u8 {
        match self {
            PairLabel::Hm => 0,
            PairLabel::Mm => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::Hm => "hm",
            PairLabel::Mm => "mm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonPair {
    pub record_id: String,
    pub side_a: String,
    pub side_b: String,
    pub label: PairLabel,
}

impl ComparisonPair {
    pub fn pair_id(&self) -> String {
        format!("{}:{}", self.record_id, self.label.as_str())
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

fn string_list(obj: &serde_json::Map<String, Value>, field: &str, line: usize) -> Result<Vec<String>, CorpusError> {
    match obj.get(field) {
        None => Err(parse_error(line, format!("missing field '{field}'"))),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| parse_error(line, format!("'{field}' must contain only strings")))
            })
            .collect(),
        Some(Value::Null) => Ok(Vec::new()),
        Some(_) => Err(parse_error(line, format!("'{field}' must be a list"))),
    }
}

/// Parses one HC3 JSON line (`id`, `question`, `human_answers`, `chatgpt_answers`).
pub fn parse_hc3_record(line: &str, line_no: usize) -> Result<QARecord, CorpusError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| parse_error(line_no, format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| parse_error(line_no, "record is not a JSON object"))?;
    let id = match obj.get("id") {
        None => return Err(parse_error(line_no, "missing field 'id'")),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err(parse_error(line_no, "'id' must be a string or number")),
    };
    let question = match obj.get("question") {
        None => return Err(parse_error(line_no, "missing field 'question'")),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(parse_error(line_no, "'question' must be a string")),
    };
    QARecord {
        id,
        question,
        human_answers: string_list(obj, "human_answers", line_no)?,
        machine_answers: string_list(obj, "chatgpt_answers", line_no)?,
        source: Source::Hc3,
    }
    .validated()
}

#[derive(Debug, Clone, Deserialize)]
pub struct WikiIntroRow {
    #[serde(default)]
    pub id: Option<String>,
    pub title: String,
    pub wiki_intro: String,
    pub generated_intro: String,
}

/// Prompt synthesized from a wiki-intro title.
pub fn wiki_intro_prompt(title: &str) -> String {
    format!("Write an introduction for a Wikipedia article about {}.", title.trim())
}

pub fn normalize_wiki_intro(row: &WikiIntroRow, row_index: usize) -> Result<QARecord, CorpusError> {
    let id = row
        .id
        .as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map_or_else(|| format!("wiki-{row_index}"), str::to_string);
    for (field, text) in [
        ("title", &row.title),
        ("wiki_intro", &row.wiki_intro),
        ("generated_intro", &row.generated_intro),
    ] {
        if text.trim().is_empty() {
            return Err(CorpusError::Validation {
                id,
                message: format!("empty '{field}'"),
            });
        }
    }
    QARecord {
        question: wiki_intro_prompt(&row.title),
        id,
        human_answers: vec![row.wiki_intro.clone()],
        machine_answers: vec![row.generated_intro.clone()],
        source: Source::WikiIntro,
    }
    .validated()
}

/// Result of reading a raw corpus: valid records plus records rejected by validation.
#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub records: Vec<QARecord>,
    pub rejected: Vec<CorpusError>,
}

fn keep_or_reject(outcome: &mut IngestOutcome, r: Result<QARecord, CorpusError>) -> Result<(), CorpusError> {
    match r {
        Ok(rec) => outcome.records.push(rec),
        Err(e @ CorpusError::Validation { .. }) => outcome.rejected.push(e),
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Reads HC3 JSON lines. Malformed lines abort; records failing validation are set aside.
pub fn read_hc3<R: BufRead>(reader: R, limit: Option<usize>) -> Result<IngestOutcome, CorpusError> {
    let mut out = IngestOutcome::default();
    for (i, line) in reader.lines().enumerate() {
        if limit.is_some_and(|l| out.records.len() >= l) {
            break;
        }
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        keep_or_reject(&mut out, parse_hc3_record(&line, i + 1))?;
    }
    check_unique(&out.records)?;
    Ok(out)
}

/// Reads a wiki-intro CSV (`title`, `wiki_intro`, `generated_intro`; extra columns ignored).
pub fn read_wiki_intro<R: Read>(reader: R, limit: Option<usize>) -> Result<IngestOutcome, CorpusError> {
    let mut out = IngestOutcome::default();
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    for (i, row) in csv.deserialize::<WikiIntroRow>().enumerate() {
        if limit.is_some_and(|l| out.records.len() >= l) {
            break;
        }
        let row = row?;
        keep_or_reject(&mut out, normalize_wiki_intro(&row, i))?;
    }
    check_unique(&out.records)?;
    Ok(out)
}

pub fn read_canonical<R: BufRead>(reader: R) -> Result<Vec<QARecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QARecord = serde_json::from_str(&line)
            .map_err(|e| parse_error(i + 1, format!("invalid canonical record: {e}")))?;
        records.push(rec.validated()?);
    }
    check_unique(&records)?;
    Ok(records)
}

pub fn write_canonical<W: Write>(mut writer: W, records: &[QARecord]) -> Result<(), CorpusError> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

fn check_unique(records: &[QARecord]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(CorpusError::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

/// HM pair from the first human and first machine answer, then an MM pair from
/// the first two machine answers, when those answers exist.
pub fn build_pairs(record: &QARecord) -> Result<Vec<ComparisonPair>, CorpusError> {
    let machine = &record.machine_answers;
    if machine.is_empty() {
        return Err(CorpusError::Unpairable(record.id.clone()));
    }
    let mut pairs = Vec::with_capacity(2);
    if let Some(human) = record.human_answers.first() {
        pairs.push(ComparisonPair {
            record_id: record.id.clone(),
            side_a: human.clone(),
            side_b: machine[0].clone(),
            label: PairLabel::Hm,
        });
    }
    if machine.len() >= 2 {
        pairs.push(ComparisonPair {
            record_id: record.id.clone(),
            side_a: machine[0].clone(),
            side_b: machine[1].clone(),
            label: PairLabel::Mm,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Default)]
pub struct PairSet {
    pub pairs: Vec<ComparisonPair>,
    pub skipped: Vec<String>,
}

impl PairSet {
    pub fn count(&self, label: PairLabel) -> usize {
        self.pairs.iter().filter(|p| p.label == label).count()
    }
}

/// Pairs for every usable record; unusable records are skipped and logged.
pub fn build_all_pairs(records: &[QARecord]) -> PairSet {
    let mut set = PairSet::default();
    for r in records {
        match build_pairs(r) {
            Ok(p) => set.pairs.extend(p),
            Err(_) => set.skipped.push(r.id.clone()),
        }
    }
    if !set.skipped.is_empty() {
        log::warn!("skipped {} record(s) without machine answers", set.skipped.len());
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CorpusError::InvalidSplit(format!(
                "train fraction {} must lie strictly between 0 and 1",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Number of training items for `n` inputs: `ceil(n * train_fraction)`.
    pub fn train_len(&self, n: usize) -> usize {
        ((n as f64) * self.train_fraction).ceil() as usize
    }
}

/// Seeded shuffle, then the first `ceil(n * fraction)` items go to training.
pub fn split_items<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    spec.validate()?;
    if items.is_empty() {
        return Err(CorpusError::InvalidSplit("cannot split an empty list".into()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let cut = spec.train_len(items.len()).min(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

pub fn split_dataset(
    records: &[QARecord],
    spec: &SplitSpec,
) -> Result<(Vec<QARecord>, Vec<QARecord>), CorpusError> {
    split_items(records, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, h: usize, m: usize) -> QARecord {
        QARecord {
            id: id.into(),
            question: format!("question {id}?"),
            human_answers: (0..h).map(|i| format!("human {id} {i}.")).collect(),
            machine_answers: (0..m).map(|i| format!("machine {id} {i}.")).collect(),
            source: Source::Custom,
        }
    }

    #[test]
    fn hc3_record_shapes() {
        let r = parse_hc3_record(
            r#"{"id":"q1","question":"Q1?","human_answers":["h"],"chatgpt_answers":["a","b"]}"#,
            1,
        )
        .unwrap();
        assert_eq!((r.human_answers.len(), r.machine_answers.len()), (1, 2));
        assert_eq!(r.source, Source::Hc3);

        let r = parse_hc3_record(r#"{"id":7,"question":"Q?","human_answers":["h"],"chatgpt_answers":[]}"#, 1)
            .unwrap();
        assert_eq!(r.id, "7");
        assert!(r.machine_answers.is_empty());
    }

    #[test]
    fn hc3_errors_name_the_field() {
        let e = parse_hc3_record(r#"{"id":"q","human_answers":[],"chatgpt_answers":[]}"#, 3).unwrap_err();
        assert!(e.to_string().contains("'question'"), "{e}");
        assert!(e.to_string().contains("line 3"));
        let e = parse_hc3_record(r#"{"id":"q","question":"x","human_answers":[]}"#, 1).unwrap_err();
        assert!(e.to_string().contains("chatgpt_answers"));
        let e = parse_hc3_record(r#"{"id":"q","question":"   ","human_answers":[],"chatgpt_answers":[]}"#, 1)
            .unwrap_err();
        assert!(matches!(e, CorpusError::Validation { .. }));
        assert!(matches!(parse_hc3_record("{not json", 1), Err(CorpusError::Parse { .. })));
    }

    #[test]
    fn wiki_rows() {
        let row = WikiIntroRow {
            id: None,
            title: "Topic".into(),
            wiki_intro: "H text".into(),
            generated_intro: "G text".into(),
        };
        let r = normalize_wiki_intro(&row, 4).unwrap();
        assert_eq!((r.human_answers.len(), r.machine_answers.len()), (1, 1));
        assert_eq!(r.id, "wiki-4");
        assert!(r.question.contains("Topic"));
        let bad = WikiIntroRow {
            generated_intro: "".into(),
            ..row
        };
        assert!(matches!(normalize_wiki_intro(&bad, 0), Err(CorpusError::Validation { .. })));
    }

    #[test]
    fn wiki_csv_limit() {
        let mut csv = String::from("id,url,title,wiki_intro,generated_intro,prompt\n");
        for i in 0..120 {
            csv.push_str(&format!("{i},http://x/{i},Title {i},Human intro {i}.,Generated intro {i}.,p\n"));
        }
        let out = read_wiki_intro(csv.as_bytes(), Some(100)).unwrap();
        assert_eq!(out.records.len(), 100);
        assert_eq!(out.records[99].id, "99");
    }

    #[test]
    fn pairing_rules() {
        let p = build_pairs(&rec("a", 1, 2)).unwrap();
        assert_eq!(p.iter().map(|p| p.label).collect::<Vec<_>>(), vec![PairLabel::Hm, PairLabel::Mm]);
        assert_eq!(p[0].side_a, "human a 0.");
        assert_eq!((p[1].side_a.as_str(), p[1].side_b.as_str()), ("machine a 0.", "machine a 1."));

        let p = build_pairs(&rec("b", 1, 1)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].label, PairLabel::Hm);

        let p = build_pairs(&rec("c", 0, 2)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].label, PairLabel::Mm);

        // Only the first human answer is used.
        let p = build_pairs(&rec("d", 3, 2)).unwrap();
        assert_eq!(p.len(), 2);

        assert!(matches!(build_pairs(&rec("e", 2, 0)), Err(CorpusError::Unpairable(_))));
        let set = build_all_pairs(&[rec("e", 2, 0), rec("f", 1, 2)]);
        assert_eq!((set.pairs.len(), set.skipped.len()), (2, 1));
    }

    #[test]
    fn split_sizes() {
        let records: Vec<_> = (0..10).map(|i| rec(&i.to_string(), 1, 2)).collect();
        let spec = SplitSpec { train_fraction: 0.8, seed: 42 };
        let (train, test) = split_dataset(&records, &spec).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let again = split_dataset(&records, &spec).unwrap();
        assert_eq!((train, test), again);

        let three: Vec<_> = (0..3).map(|i| rec(&i.to_string(), 1, 1)).collect();
        let (train, test) = split_dataset(&three, &SplitSpec { train_fraction: 0.5, seed: 1 }).unwrap();
        assert_eq!((train.len(), test.len()), (2, 1));
    }

    #[test]
    fn split_guards() {
        assert!(split_dataset(&[], &SplitSpec::default()).is_err());
        let one = vec![rec("x", 1, 1)];
        assert!(split_dataset(&one, &SplitSpec { train_fraction: 1.0, seed: 0 }).is_err());
        assert!(split_dataset(&one, &SplitSpec { train_fraction: 0.0, seed: 0 }).is_err());
    }

    #[test]
    fn canonical_round_trip_and_duplicates() {
        let records = vec![rec("a", 1, 2), rec("b", 0, 1)];
        let mut buf = Vec::new();
        write_canonical(&mut buf, &records).unwrap();
        assert_eq!(read_canonical(buf.as_slice()).unwrap(), records);
        let dup = vec![rec("a", 1, 2), rec("a", 0, 1)];
        let mut buf = Vec::new();
        write_canonical(&mut buf, &dup).unwrap();
        assert!(matches!(read_canonical(buf.as_slice()), Err(CorpusError::DuplicateId(_))));
    }

    #[test]
    fn hc3_reader_sets_aside_invalid_records() {
        let data = concat!(
            r#"{"id":"1","question":"Q?","human_answers":["h"],"chatgpt_answers":["a","b"]}"#, "\n",
            r#"{"id":"2","question":"","human_answers":["h"],"chatgpt_answers":["a"]}"#, "\n",
            "\n",
            r#"{"id":"3","question":"Q3?","human_answers":[" "],"chatgpt_answers":["a"]}"#, "\n",
        );
        let out = read_hc3(data.as_bytes(), None).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejected.len(), 2);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..60, frac in 0.01f64..0.99, seed in any::<u64>()) {
            let items: Vec<usize> = (0..n).collect();
            let spec = SplitSpec { train_fraction: frac, seed };
            let (train, test) = split_items(&items, &spec).unwrap();
            prop_assert_eq!(train.len(), spec.train_len(n).min(n));
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, items);
        }

        #[test]
        fn pair_labels_follow_provenance(h in 0usize..3, m in 1usize..4) {
            let r = rec("r", h, m);
            for p in build_pairs(&r).unwrap() {
                prop_assert_ne!(&p.side_a, &p.side_b);
                let a_machine = r.machine_answers.contains(&p.side_a);
                let b_machine = r.machine_answers.contains(&p.side_b);
                match p.label {
                    PairLabel::Mm => prop_assert!(a_machine && b_machine),
                    PairLabel::Hm => prop_assert!(r.human_answers.contains(&p.side_a) && b_machine),
                }
            }
        }
    }
}
