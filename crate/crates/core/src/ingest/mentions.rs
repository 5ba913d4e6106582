//! Inline figure references ("Figure 3", "Figs. 2–4", "Fig. 1 and 5").

use std::sync::LazyLock;

use regex::Regex;

/// Numbers above this are treated as noise (line numbers, identifiers).
pub const MAX_FIGURE_NUMBER: u64 = 1000;

static MENTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:figures|figure|figs\.|fig\.)\s*\d+(?:\s*(?:,\s*and\b|,|\band\b|&|–|—|-)\s*\d+)*",
    )
    .expect("mention grammar")
});

static LIST_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d+|[–—-]").expect("list token grammar"));

static CAPTION_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:figure|fig\.)\s*(\d+)[:.\s]").expect("caption label grammar")
});

/// One inline reference inside a paragraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FigureMention {
    /// Byte offsets of the whole match in the paragraph text.
    pub start: usize,
    pub end: usize,
    /// Referenced figure numbers in order of appearance, ranges expanded.
    pub numbers: Vec<u32>,
}

pub fn extract_figure_mentions(text: &str) -> Vec<FigureMention> {
    MENTION
        .find_iter(text)
        .filter_map(|m| {
            let numbers = parse_number_list(m.as_str());
            (!numbers.is_empty()).then(|| FigureMention {
                start: m.start(),
                end: m.end(),
                numbers,
            })
        })
        .collect()
}

fn parse_number_list(matched: &str) -> Vec<u32> {
    let mut raw: Vec<u64> = Vec::new();
    let mut pending_range = false;
    for tok in LIST_TOKEN.find_iter(matched) {
        let tok = tok.as_str();
        if tok.starts_with(|c: char| c.is_ascii_digit()) {
            let n = tok.parse::<u64>().unwrap_or(u64::MAX);
            match raw.last() {
                Some(&prev) if pending_range && prev <= n && n <= MAX_FIGURE_NUMBER => {
                    raw.extend(prev + 1..=n);
                }
                _ => raw.push(n),
            }
            pending_range = false;
        } else {
            pending_range = true;
        }
    }
    let mut out: Vec<u32> = Vec::new();
    for n in raw {
        if (1..=MAX_FIGURE_NUMBER).contains(&n) && !out.contains(&(n as u32)) {
            out.push(n as u32);
        }
    }
    out
}

/// The printed figure number at the head of a caption, if any.
pub fn parse_caption_label(caption: &str) -> Option<u32> {
    let caps = CAPTION_LABEL.captures(caption)?;
    caps[1].parse::<u32>().ok().filter(|&n| n >= 1)
}
