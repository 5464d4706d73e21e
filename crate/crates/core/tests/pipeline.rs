use paraprobe::classifier::{LdaModel, Level};
use paraprobe::corpus::{build_all_pairs, read_hc3};
use paraprobe::pipeline::{score_pairs, DetectOptions, Detector};
use paraprobe::providers::{Generator, MockEmbedder, MockGenerator};
use paraprobe::report::DetectionReport;
use paraprobe::scores::{read_score_table, write_score_table};
use paraprobe::segmenter::segment;
use paraprobe::vectorstore::{Origin, VectorStore};
use proptest::prelude::*;
use serde_json::json;

const HC3: &str = r#"{"id":"a","question":"Why is ice slippery?","human_answers":["A thin layer of water sits on top. Your shoe slides on it."],"chatgpt_answers":["Ice is slippery because of a thin liquid layer on its surface. This layer acts like a lubricant.","The surface of ice has a film of water. That film reduces friction."]}
{"id":"b","question":"Why do cats purr?","human_answers":["Nobody really knows. They do it when happy and when hurt."],"chatgpt_answers":["Cats purr by vibrating muscles in the larynx. It often signals contentment.","Purring comes from rapid twitching of laryngeal muscles. Cats purr when relaxed or stressed."]}
"#;

fn model(level: Level, threshold: f64) -> LdaModel {
    LdaModel {
        mu0: 0.7343,
        mu1: 0.8527,
        pooled_variance: 0.0033,
        prior0: 0.5,
        prior1: 0.5,
        threshold,
        level,
    }
}

#[test]
fn score_table_row_counts_and_round_trip() {
    let records = read_hc3(HC3.as_bytes(), None).unwrap().records;
    let pairs = build_all_pairs(&records).pairs;
    assert_eq!(pairs.len(), 4);
    let emb = MockEmbedder::new(5, 256);
    let mut store = VectorStore::new();
    let out = score_pairs(&pairs, &emb, Some(&mut store));
    let side_a_sentences: usize = pairs.iter().map(|p| segment("x", &p.side_a).len()).sum();
    let side_b_sentences: usize = pairs.iter().map(|p| segment("x", &p.side_b).len()).sum();
    let doc_rows = out.rows.iter().filter(|r| r.level == Level::Document).count();
    assert_eq!(doc_rows, pairs.len());
    assert_eq!(out.rows.len() - doc_rows, side_a_sentences);
    assert_eq!(store.len(), side_a_sentences + side_b_sentences);
    assert_eq!(store.get(0).unwrap().1.origin, Origin::Human);

    let mut buf = Vec::new();
    write_score_table(&mut buf, &out.rows).unwrap();
    assert_eq!(read_score_table(buf.as_slice()).unwrap(), out.rows);
    let mut again = Vec::new();
    write_score_table(&mut again, &score_pairs(&pairs, &emb, None).rows).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn verbatim_copy_scores_one_and_is_flagged() {
    let gen = MockGenerator::new(21);
    let emb = MockEmbedder::new(21, 256);
    let question = "Why do onions make people cry?";
    let copied = gen.generate_answer(question).unwrap();
    let (sm, dm) = (model(Level::Sentence, 0.40), model(Level::Document, 0.66));
    let detector = Detector {
        paraphraser: &gen,
        generator: &gen,
        embedder: &emb,
        sentence_model: &sm,
        document_model: &dm,
        options: DetectOptions::default(),
        config: json!({}),
    };
    let report = detector.detect(question, &copied, None).unwrap();
    assert_eq!(report.document.score, 1.0);
    assert_eq!(report.document.label, 1);
    assert!(report.sentences.iter().all(|s| s.score == 1.0 && s.label == 1));
    for t in [0.0, 0.5, 0.9, 0.99] {
        let m = LdaModel { threshold: t, ..dm.clone() };
        assert_eq!(m.classify(report.document.score), 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reports_are_self_consistent(
        words in prop::collection::vec("[a-z]{3,9}", 3..40),
        seed in 0u64..1000,
        paraphrase in any::<bool>(),
    ) {
        let text: String = words
            .chunks(5)
            .map(|c| {
                let mut s = c.join(" ");
                s[..1].make_ascii_uppercase();
                s + "."
            })
            .collect::<Vec<_>>()
            .join(" ");
        let gen = MockGenerator::new(seed);
        let emb = MockEmbedder::new(seed, 128);
        let (sm, dm) = (model(Level::Sentence, 0.4), model(Level::Document, 0.66));
        let detector = Detector {
            paraphraser: &gen,
            generator: &gen,
            embedder: &emb,
            sentence_model: &sm,
            document_model: &dm,
            options: DetectOptions { use_paraphrasing: paraphrase, ..DetectOptions::default() },
            config: json!({"seed": seed}),
        };
        let report = detector.detect("What happens to words in a sentence?", &text, None).unwrap();
        let sum: f64 = report.sentences.iter().map(|s| s.score).sum();
        prop_assert_eq!(sum / report.sentences.len() as f64, report.document.score);
        prop_assert!(report.sentences.iter().all(|s| (0.0..=1.0).contains(&s.posterior)));
        prop_assert_eq!(report.answers.len(), if paraphrase { 4 } else { 1 });
        let parsed = DetectionReport::from_json(&report.to_json()).unwrap();
        prop_assert_eq!(parsed, report);
    }
}
