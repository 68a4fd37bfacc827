//! Text cleaning: viability filter, URL-title extraction, lowercasing,
//! non-ASCII stripping, sentence/hashtag/punctuation accounting, and
//! whitespace tokenization.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledMessage;
use crate::error::{Error, Result};

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)https?://\S+").unwrap());

/// A message after cleaning. Tokens contain only `[a-z0-9']`, with
/// apostrophes only between alphanumerics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanMessage {
    pub id: String,
    pub tokens: Vec<String>,
    pub sentence_count: usize,
    pub punct_count: usize,
    pub hashtag_count: usize,
    pub char_count_original: usize,
}

/// At least two whitespace-separated words, at least five characters, and
/// some letter outside of URLs.
pub fn is_viable(raw_text: &str) -> bool {
    let text = raw_text.trim();
    if text.split_whitespace().count() < 2 || text.chars().count() < 5 {
        return false;
    }
    URL.replace_all(text, " ").chars().any(char::is_alphabetic)
}

/// Words of a URL's path slug: everything between the first `/` after the
/// scheme and the final `/`, lowercased, with separators mapped to spaces
/// and all other punctuation dropped. Empty for bare domains and shortened
/// links.
pub fn url_slug_words(url: &str) -> String {
    let without_scheme = match url.find("://") {
        Some(p) => &url[p + 3..],
        None => url,
    };
    let Some(first) = without_scheme.find('/') else {
        return String::new();
    };
    let path = &without_scheme[first + 1..];
    let Some(last) = path.rfind('/') else {
        return String::new();
    };
    let slug = &path[..last];
    let mut out = String::with_capacity(slug.len());
    for c in slug.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if matches!(c, '-' | '_' | '/' | '+' | '.') {
            out.push(' ');
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Replaces every URL in `raw_text` with the words of its slug.
pub fn extract_url_titles(raw_text: &str) -> String {
    let mut out = String::with_capacity(raw_text.len());
    let mut last = 0;
    for m in URL.find_iter(raw_text) {
        let words = url_slug_words(m.as_str());
        let before = &raw_text[last..m.start()];
        if words.is_empty() {
            // drop the URL together with one separating space
            last = m.end();
            match before.strip_suffix(' ') {
                Some(trimmed) => out.push_str(trimmed),
                None => {
                    out.push_str(before);
                    if raw_text[last..].starts_with(' ') {
                        last += 1;
                    }
                }
            }
        } else {
            out.push_str(before);
            out.push_str(&words);
            last = m.end();
        }
    }
    out.push_str(&raw_text[last..]);
    out
}

/// Counts sentences by terminator runs (`.`, `!`, `?`); trailing text without
/// a terminator is one more sentence. Never less than one.
fn count_sentences(text: &str) -> usize {
    let mut count = 0;
    let mut content_since_terminator = false;
    let mut in_run = false;
    for c in text.chars() {
        if matches!(c, '.' | '!' | '?') {
            if !in_run && content_since_terminator {
                count += 1;
                content_since_terminator = false;
            }
            in_run = true;
        } else {
            in_run = false;
            if c.is_ascii_alphanumeric() {
                content_since_terminator = true;
            }
        }
    }
    if content_since_terminator {
        count += 1;
    }
    count.max(1)
}

fn count_hashtags(text: &str) -> usize {
    let bytes = text.as_bytes();
    bytes
        .iter()
        .enumerate()
        .filter(|&(i, &b)| b == b'#' && bytes.get(i + 1).is_some_and(u8::is_ascii_alphanumeric))
        .count()
}

/// Removes punctuation, returning the text with each removed glyph replaced
/// by a space and the number of glyphs removed. Apostrophes between two
/// alphanumerics are kept.
fn strip_punctuation(text: &str) -> (String, usize) {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut removed = 0;
    for (i, &c) in chars.iter().enumerate() {
        if c.is_ascii_alphanumeric() || c.is_whitespace() {
            out.push(c);
        } else if c == '\''
            && i > 0
            && chars[i - 1].is_ascii_alphanumeric()
            && chars.get(i + 1).is_some_and(char::is_ascii_alphanumeric)
        {
            out.push(c);
        } else {
            removed += 1;
            out.push(' ');
        }
    }
    (out, removed)
}

/// Ratio of ASCII letters among all letters; a crude English filter that the
/// pipeline does not apply unless asked to.
pub fn ascii_letter_ratio(raw_text: &str) -> f64 {
    let (ascii, total) = raw_text
        .chars()
        .filter(|c| c.is_alphabetic())
        .fold((0usize, 0usize), |(a, t), c| (a + c.is_ascii() as usize, t + 1));
    if total == 0 {
        0.0
    } else {
        ascii as f64 / total as f64
    }
}

/// Cleans raw text. Errors when no token survives.
pub fn clean_raw(id: &str, raw_text: &str) -> Result<CleanMessage> {
    let char_count_original = raw_text.chars().count();
    let text = extract_url_titles(raw_text).to_lowercase();
    let text: String = text.chars().filter(char::is_ascii).collect();
    let sentence_count = count_sentences(&text);
    let hashtag_count = count_hashtags(&text);
    let (text, punct_count) = strip_punctuation(&text);
    let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err(Error::invalid(format!("message `{id}` has no tokens after cleaning")));
    }
    Ok(CleanMessage {
        id: id.to_string(),
        tokens,
        sentence_count,
        punct_count,
        hashtag_count,
        char_count_original,
    })
}

pub fn clean_text(msg: &LabeledMessage) -> Result<CleanMessage> {
    clean_raw(&msg.id, &msg.raw_text)
}
