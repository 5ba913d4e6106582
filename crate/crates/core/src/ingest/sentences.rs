//! Rule-based sentence segmentation for scientific prose.
//!
//! A sentence ends at a run of `.`, `!` or `?` (plus trailing closing
//! quotes/brackets) when the run is followed by whitespace and an uppercase
//! letter, or by the end of the text. A lone `.` after a protected word
//! (figure abbreviations, Latin abbreviations, single-letter initials) never
//! ends a sentence. Decimal points are followed by a digit and so never match.

/// A sentence as a byte range of its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceSpan<'a> {
    pub start: usize,
    pub end: usize,
    pub text: &'a str,
}

const PROTECTED: &[&str] = &["fig", "figs", "e.g", "i.e", "cf", "vs"];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];

pub fn split_sentences(text: &str) -> Vec<SentenceSpan<'_>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = text.char_indices().peekable();

    while let Some((i, c)) = chars.next() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut end = i + c.len_utf8();
        let mut run_len = 1;
        while let Some(&(j, n)) = chars.peek() {
            if matches!(n, '.' | '!' | '?') {
                run_len += 1;
            } else if !CLOSERS.contains(&n) {
                break;
            }
            end = j + n.len_utf8();
            chars.next();
        }
        let s = start.expect("sentence started");
        if c == '.' && run_len == 1 && is_protected(&text[s..i], &text[..i]) {
            continue;
        }
        if is_boundary(&text[end..]) {
            spans.push(SentenceSpan {
                start: s,
                end,
                text: &text[s..end],
            });
            start = None;
        }
    }

    if let Some(s) = start {
        let end = s + text[s..].trim_end().len();
        spans.push(SentenceSpan {
            start: s,
            end,
            text: &text[s..end],
        });
    }
    spans
}

fn is_boundary(rest: &str) -> bool {
    let trimmed = rest.trim_start();
    if trimmed.is_empty() {
        return true;
    }
    if trimmed.len() == rest.len() {
        return false;
    }
    trimmed
        .trim_start_matches(OPENERS)
        .chars()
        .next()
        .is_some_and(char::is_uppercase)
}

/// `sentence` runs from the sentence start to the `.`; `before` is all text
/// preceding the `.`.
fn is_protected(sentence: &str, before: &str) -> bool {
    let word_start = sentence
        .char_indices()
        .rev()
        .take_while(|&(_, ch)| ch.is_alphanumeric() || ch == '.')
        .last()
        .map(|(k, _)| k)
        .unwrap_or(sentence.len());
    let word = sentence[word_start..].to_lowercase();
    if word.is_empty() {
        return false;
    }
    if PROTECTED.contains(&word.as_str()) {
        return true;
    }
    let mut letters = word.chars();
    if let (Some(first), None) = (letters.next(), letters.next()) {
        if first.is_alphabetic() {
            return true;
        }
    }
    if word == "al" {
        let head = &before[..before.len() - 2];
        let head = head.trim_end();
        if head.len() == before.len() - 2 {
            return false;
        }
        let lower = head.to_lowercase();
        return lower == "et" || lower.ends_with(" et") || lower.ends_with("(et");
    }
    false
}
