/// Bumped whenever the template text changes; it is part of every paraphrase cache key.
pub const PARAPHRASE_PROMPT_VERSION: &str = "paraphrase-v1";

const PARAPHRASE_TEMPLATE: &str = include_str!("../../assets/paraphrase_prompt_v1.txt");

pub fn paraphrase_prompt(question: &str, k: usize) -> String {
    PARAPHRASE_TEMPLATE
        .replace("{k}", &k.to_string())
        .replace("{question}", question.trim())
}

/// Extracts paraphrases from a numbered-list completion: strips list markers,
/// drops blanks, duplicates and copies of the original question.
pub fn parse_paraphrase_lines(completion: &str, question: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in completion.lines() {
        let text = strip_list_marker(line.trim()).trim();
        if text.is_empty() || text == question.trim() || out.iter().any(|o| o == text) {
            continue;
        }
        out.push(text.to_string());
    }
    out
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim_start_matches(['-', '*', '\u{2022}', ' ']);
    let rest = line.strip_prefix(['P', 'p']).unwrap_or(line);
    let digits = rest.len() - rest.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        if let Some(after) = rest[digits..].strip_prefix(['.', ')', ':']) {
            return after;
        }
    }
    line
}
