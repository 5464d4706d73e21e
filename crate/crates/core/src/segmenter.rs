//! Rule-based sentence boundary detection.
//!
//! A boundary is placed after a run of `.`, `!` or `?` (optionally followed by
//! closing quotes or brackets) when the run is followed by whitespace and then
//! an uppercase letter, a digit, or the end of the text. A single `.` closing a
//! known abbreviation never ends a sentence.
//!
//! Offsets in [`Sentence::span`] are byte offsets into the source text, so
//! `&body[start..end] == sentence.text` always holds.

use serde::{Deserialize, Serialize};

/// Abbreviations (lowercase, without the final period) that never end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "e.g", "i.e", "etc", "vs", "st", "no", "prof", "jr", "sr",
];

const TERMINATORS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}', '\u{00bb}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '{', '\u{201c}', '\u{2018}', '\u{00ab}'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    /// Byte range `(start, end)` into the source document.
    pub span: (usize, usize),
}

/// Splits `body` into sentences. Whitespace-only input yields an empty list.
pub fn segment(doc_id: &str, body: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut push = |start: usize, end: usize| {
        let text = &body[start..end];
        if text.trim().is_empty() {
            return;
        }
        out.push(Sentence {
            doc_id: doc_id.to_string(),
            index: out.len(),
            text: text.to_string(),
            span: (start, end),
        });
    };

    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(pos);
        }
        if !TERMINATORS.contains(&c) {
            i += 1;
            continue;
        }

        // Terminator run, then closing punctuation.
        let run_start = i;
        let mut j = i;
        while j < chars.len() && TERMINATORS.contains(&chars[j].1) {
            j += 1;
        }
        let single_period = j - run_start == 1 && c == '.';
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(body.len(), |&(p, _)| p);

        let at_boundary = if j == chars.len() {
            true
        } else if chars[j].1.is_whitespace() {
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            k == chars.len() || chars[k].1.is_uppercase() || chars[k].1.is_ascii_digit()
        } else {
            false
        };

        let s = start.expect("sentence start set before terminator");
        if at_boundary && !(single_period && ends_with_abbreviation(&body[s..pos])) {
            push(s, end);
            start = None;
        }
        i = j;
    }
    if let Some(s) = start {
        let end = s + body[s..].trim_end().len();
        push(s, end);
    }
    out
}

/// Whether the word immediately before a period is a known abbreviation.
fn ends_with_abbreviation(before_period: &str) -> bool {
    let word = before_period
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(OPENERS);
    if word.is_empty() {
        return false;
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(body: &str) -> Vec<String> {
        segment("d", body).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn single_sentence() {
        assert_eq!(texts("Hello world."), vec!["Hello world."]);
    }

    #[test]
    fn two_clauses_with_spans() {
        let s = segment("d", "A runs. B walks.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].span, (0, 7));
        assert_eq!(s[1].span, (8, 16));
        assert_eq!(s[1].index, 1);
    }

    #[test]
    fn abbreviation_suppresses_boundary() {
        assert_eq!(
            texts("Dr. Smith arrived. He left."),
            vec!["Dr. Smith arrived.", "He left."]
        );
        assert_eq!(texts("See e.g. The Book. Then go."), vec!["See e.g. The Book.", "Then go."]);
        assert_eq!(texts("(etc. Also more) Fine."), vec!["(etc. Also more) Fine."]);
    }

    #[test]
    fn no_terminator_is_one_sentence() {
        assert_eq!(texts("  no terminator here  "), vec!["no terminator here"]);
    }

    #[test]
    fn whitespace_only_is_empty() {
        assert!(segment("d", "   \n\t ").is_empty());
        assert!(segment("d", "").is_empty());
    }

    #[test]
    fn lowercase_continuation_is_not_a_boundary() {
        assert_eq!(texts("It costs 3.5 dollars. ok then."), vec!["It costs 3.5 dollars. ok then."]);
    }

    #[test]
    fn closing_quotes_and_digits() {
        assert_eq!(
            texts("He said \"stop.\" 42 people left! Why? Because."),
            vec!["He said \"stop.\"", "42 people left!", "Why?", "Because."]
        );
    }

    #[test]
    fn repeated_terminators_and_ellipses() {
        assert_eq!(texts("Really?! Yes... Fine"), vec!["Really?!", "Yes...", "Fine"]);
        assert_eq!(texts("muttering \" hmmm \" and more."), vec!["muttering \" hmmm \" and more."]);
    }

    #[test]
    fn short_fragments_are_kept() {
        assert_eq!(texts("Yes. No way. Ok."), vec!["Yes.", "No way.", "Ok."]);
    }

    #[test]
    fn multibyte_offsets() {
        let body = "Café closed. Ünder way.";
        for s in segment("d", body) {
            assert_eq!(&body[s.span.0..s.span.1], s.text);
        }
    }

    fn arb_body() -> impl Strategy<Value = String> {
        let piece = prop_oneof![
            Just("Dr.".to_string()),
            Just("e.g.".to_string()),
            Just(".".to_string()),
            Just("!".to_string()),
            Just("?".to_string()),
            Just("\"".to_string()),
            Just(")".to_string()),
            Just(" ".to_string()),
            Just("\n".to_string()),
            "[A-Za-z0-9]{1,6}",
        ];
        prop::collection::vec(piece, 0..40).prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn span_fidelity_and_monotone(body in arb_body()) {
            let sents = segment("d", &body);
            let mut last_end = 0;
            for (i, s) in sents.iter().enumerate() {
                prop_assert_eq!(s.index, i);
                prop_assert_eq!(&body[s.span.0..s.span.1], s.text.as_str());
                prop_assert!(s.span.0 >= last_end);
                prop_assert!(s.span.0 < s.span.1);
                prop_assert!(body[last_end..s.span.0].trim().is_empty());
                prop_assert!(!s.text.trim().is_empty());
                last_end = s.span.1;
            }
            prop_assert!(body[last_end..].trim().is_empty());
            prop_assert_eq!(sents.is_empty(), body.trim().is_empty());
        }

        #[test]
        fn idempotent(body in arb_body()) {
            for s in segment("d", &body) {
                let again = segment("d", &s.text);
                prop_assert_eq!(again.len(), 1);
                prop_assert_eq!(&again[0].text, &s.text);
            }
        }
    }
}
