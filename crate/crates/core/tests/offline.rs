use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use paraprobe::classifier::{LdaModel, Level};
use paraprobe::config::RunConfig;
use paraprobe::corpus::{build_all_pairs, QARecord, Source};
use paraprobe::pipeline::{score_pairs, DetectOptions, Detector};
use paraprobe::providers::{
    embedder_with_cache, generator_with_cache, Transport, TransportError,
};
use serde_json::Value;

#[derive(Default)]
struct FailingTransport {
    calls: AtomicUsize,
}

impl Transport for FailingTransport {
    fn post_json(&self, _: &str, _: Option<&str>, _: &Value, _: Duration) -> Result<Value, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Network("network use is forbidden in this test".into()))
    }
}

fn model(level: Level) -> LdaModel {
    LdaModel {
        mu0: 0.4,
        mu1: 0.8,
        pooled_variance: 0.02,
        prior0: 0.5,
        prior1: 0.5,
        threshold: 0.5,
        level,
    }
}

#[test]
fn mock_providers_never_touch_the_transport() {
    let transport = Arc::new(FailingTransport::default());
    let cfg = RunConfig::default();
    let cache = tempfile::tempdir().unwrap();
    let p = &cfg.providers;
    let paraphraser = generator_with_cache(&p.paraphrase, transport.clone(), Some(cache.path())).unwrap();
    let generator = generator_with_cache(&p.generation, transport.clone(), Some(cache.path())).unwrap();
    let embedder = embedder_with_cache(&p.embedding, transport.clone(), Some(cache.path())).unwrap();

    let (sm, dm) = (model(Level::Sentence), model(Level::Document));
    let detector = Detector {
        paraphraser: &*paraphraser,
        generator: &*generator,
        embedder: &*embedder,
        sentence_model: &sm,
        document_model: &dm,
        options: DetectOptions {
            use_paraphrasing: true,
            ..DetectOptions::default()
        },
        config: cfg.fingerprint(),
    };
    let first = detector
        .detect("How do vaccines train the immune system?", "Vaccines show the body a harmless piece of a germ. The immune system learns it.", None)
        .unwrap();
    // Second run is served from the cache and must agree exactly.
    let second = detector
        .detect("How do vaccines train the immune system?", "Vaccines show the body a harmless piece of a germ. The immune system learns it.", None)
        .unwrap();
    assert_eq!(first, second);

    let records = vec![QARecord {
        id: "v1".into(),
        question: "How do vaccines work?".into(),
        human_answers: vec!["They teach your body. It remembers.".into()],
        machine_answers: vec![
            "Vaccines train the immune system. They use weakened germs.".into(),
            "A vaccine exposes the body to an antigen. Memory cells form.".into(),
        ],
        source: Source::Custom,
    }];
    let outcome = score_pairs(&build_all_pairs(&records).pairs, &*embedder, None);
    assert!(outcome.failures.is_empty());
    assert_eq!(transport.calls.load(Ordering::SeqCst), 0);
}
