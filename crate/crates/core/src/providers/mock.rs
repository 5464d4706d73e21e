//! Deterministic offline providers.
//!
//! The embedder is a feature-hashed bag of words: every lowercase word token
//! adds a seeded ±1 to one of `dimension` buckets. Texts sharing more tokens
//! therefore get a higher cosine. The generator paraphrases by seeded synonym
//! swaps, sentence rotation and framing, and answers with templated sentences
//! built from the question's content words.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{check_paraphrase_args, check_question, check_texts, Embedder, Generator, ProviderError};
use crate::embedding::EmbeddingVector;
use crate::segmenter::segment;

pub const DEFAULT_MOCK_DIMENSION: usize = 256;

/// Bumped when mock outputs change, so stale cache entries are not reused.
const MOCK_VERSION: u32 = 1;

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn rng_for(seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    let mut all: Vec<&[u8]> = Vec::with_capacity(parts.len() + 1);
    let seed_bytes = seed.to_le_bytes();
    all.push(&seed_bytes);
    all.extend_from_slice(parts);
    let d = digest(&all);
    ChaCha8Rng::from_seed(d)
}

/// Lowercase alphanumeric word tokens.
pub(crate) fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
    dimension: usize,
}

impl MockEmbedder {
    pub fn new(seed: u64, dimension: usize) -> Self {
        assert!(dimension > 0, "mock embedding dimension must be positive");
        Self { seed, dimension }
    }

    fn bucket(&self, token: &[u8]) -> (usize, f64) {
        let d = digest(&[&self.seed.to_le_bytes(), token]);
        let idx = u64::from_le_bytes(d[..8].try_into().unwrap()) % self.dimension as u64;
        let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
        (idx as usize, sign)
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0f64; self.dimension];
        for token in word_tokens(text) {
            let (i, s) = self.bucket(token.as_bytes());
            values[i] += s;
        }
        if values.iter().all(|&v| v == 0.0) {
            // No word tokens, or their signs cancelled: hash the whole text instead.
            let (i, _) = self.bucket(format!("\u{0}text\u{0}{}", text.trim()).as_bytes());
            values[i] = 1.0;
        }
        EmbeddingVector::new(values, self.provider_tag()).expect("mock embedding is non-zero")
    }
}

impl Embedder for MockEmbedder {
    fn identity(&self) -> Value {
        json!({
            "kind": "mock-bow",
            "version": MOCK_VERSION,
            "seed": self.seed,
            "dimension": self.dimension,
        })
    }

    fn provider_tag(&self) -> String {
        format!("mock-bow/d{}/s{}", self.dimension, self.seed)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_texts(texts)?;
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

const SYNONYMS: &[(&str, &[&str])] = &[
    ("what", &["which thing"]),
    ("really", &["actually", "truly"]),
    ("always", &["long", "for a long time"]),
    ("wanted", &["wished", "hoped"]),
    ("know", &["understand", "find out"]),
    ("why", &["for what reason"]),
    ("explain", &["describe", "break down"]),
    ("doing", &["up to", "working on"]),
    ("possibly", &["even"]),
    ("requires", &["needs", "demands"]),
    ("precision", &["accuracy", "exactness"]),
    ("speed", &["quickness", "swiftness"]),
    ("like", &["as if"]),
    ("how", &["in what way"]),
    ("does", &["can"]),
    ("work", &["function", "operate"]),
    ("happen", &["occur", "take place"]),
    ("help", &["assist"]),
    ("make", &["create", "produce"]),
    ("people", &["folks", "individuals"]),
    ("big", &["large", "huge"]),
    ("small", &["little", "tiny"]),
    ("difference", &["distinction"]),
    ("use", &["employ", "utilize"]),
    ("get", &["obtain", "receive"]),
    ("important", &["significant", "essential"]),
    ("simple", &["plain", "easy"]),
    ("fast", &["quickly", "rapidly"]),
];

const FRAMES: &[&str] = &[
    "{q}",
    "Could you help me with this? {q}",
    "{q} Please keep the explanation simple.",
    "Here is my question: {q}",
    "I have been curious about this. {q}",
    "{q} A short explanation is fine.",
];

const STOPWORDS: &[&str] = &[
    "about", "after", "again", "also", "always", "been", "before", "being", "could", "does",
    "doing", "from", "have", "here", "into", "just", "know", "like", "many", "more", "most",
    "much", "only", "other", "please", "really", "same", "should", "some", "such", "than",
    "that", "their", "them", "then", "there", "these", "they", "this", "those", "very", "want",
    "wanted", "what", "when", "where", "which", "while", "with", "would", "your", "explain",
    "five", "actually", "possibly", "probably", "requires", "ever", "every", "make",
    "makes", "something", "someone", "thing", "things", "work", "works",
];

const ANSWER_TEMPLATES: &[&str] = &[
    "{a} is mostly about {b} and {c}.",
    "People often ask about {a} because {b} can seem confusing at first.",
    "In simple terms, {a} works by combining {b} with careful attention to {c}.",
    "A good way to think about {a} is to compare it to everyday {b}.",
    "Experts who study {a} usually focus on {b} and {c}.",
    "Overall, {a} and {b} are closely connected.",
    "The key idea is that {b} shapes how {a} behaves.",
];

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Replaces the alphabetic core of `word`, keeping surrounding punctuation and initial case.
fn swap_word(word: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    let start = word.find(char::is_alphanumeric)?;
    let end = word.rfind(char::is_alphanumeric)? + 1;
    let core = &word[start..end];
    let lower = core.to_lowercase();
    let (_, choices) = SYNONYMS.iter().find(|(w, _)| *w == lower)?;
    let mut replacement = (*choices.choose(rng)?).to_string();
    if core.starts_with(char::is_uppercase) {
        replacement = capitalize(&replacement);
    }
    Some(format!("{}{}{}", &word[..start], replacement, &word[end..]))
}

#[derive(Debug, Clone)]
pub struct MockGenerator {
    seed: u64,
}

impl MockGenerator {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn variant(&self, question: &str, attempt: usize) -> String {
        let mut rng = rng_for(
            self.seed,
            &[b"paraphrase", question.as_bytes(), &(attempt as u64).to_le_bytes()],
        );
        let mut sentences: Vec<String> = segment("q", question).into_iter().map(|s| s.text).collect();
        if sentences.len() > 1 && rng.random_bool(0.5) {
            let first = sentences.remove(0);
            sentences.push(first);
        }
        let body = sentences
            .iter()
            .map(|s| {
                s.split(' ')
                    .map(|w| {
                        if rng.random_bool(0.6) {
                            swap_word(w, &mut rng).unwrap_or_else(|| w.to_string())
                        } else {
                            w.to_string()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join(" ");
        let frame = FRAMES[(attempt + rng.random_range(0..FRAMES.len())) % FRAMES.len()];
        frame.replace("{q}", &body)
    }
}

impl Generator for MockGenerator {
    fn identity(&self) -> Value {
        json!({"kind": "mock-generator", "version": MOCK_VERSION, "seed": self.seed})
    }

    fn paraphrase(&self, question: &str, k: usize) -> Result<Vec<String>, ProviderError> {
        check_paraphrase_args(question, k)?;
        let question = question.trim();
        let mut out: Vec<String> = Vec::with_capacity(k);
        for attempt in 0..8 * k {
            if out.len() == k {
                break;
            }
            let v = self.variant(question, attempt);
            if v != question && !out.contains(&v) {
                out.push(v);
            }
        }
        let mut n = 1;
        while out.len() < k {
            let v = format!("Rephrased ({n}): {question}");
            if !out.contains(&v) {
                out.push(v);
            }
            n += 1;
        }
        Ok(out)
    }

    fn generate_answer(&self, question: &str) -> Result<String, ProviderError> {
        check_question(question)?;
        let mut rng = rng_for(self.seed, &[b"answer", question.trim().as_bytes()]);
        let mut words: Vec<String> = Vec::new();
        for t in word_tokens(question) {
            if t.len() >= 4 && !STOPWORDS.contains(&t.as_str()) && !words.contains(&t) {
                words.push(t);
            }
        }
        if words.is_empty() {
            words.push("this topic".into());
        }
        let mut templates: Vec<&str> = ANSWER_TEMPLATES.to_vec();
        templates.shuffle(&mut rng);
        let n = rng.random_range(3..=5);
        let sentences: Vec<String> = templates[..n]
            .iter()
            .map(|t| {
                let mut pick = || words.choose(&mut rng).cloned().unwrap_or_default();
                let s = t.replace("{a}", &pick()).replace("{b}", &pick()).replace("{c}", &pick());
                capitalize(&s)
            })
            .collect();
        Ok(sentences.join(" "))
    }
}
