//! Dictionary-driven semantic features.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;

use super::lexicon::{Lexicon, MatchMode, PronounInventory, ECHO_TEMPLATE};

static ECHO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(\(\(\s*[^()\s][^()]*?\)\)\)").unwrap());

/// Number of lexicon matches and their summed severity. Phrase lexicons
/// match the longest entry at each position and skip past it.
pub fn hate_lexicon_features(tokens: &[String], lex: &Lexicon) -> (usize, f64) {
    let max_len = match lex.match_mode() {
        MatchMode::Phrase => lex.max_phrase_len().max(1),
        _ => 1,
    };
    let mut count = 0;
    let mut severity = 0.0;
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = 0;
        for len in (1..=max_len.min(tokens.len() - i)).rev() {
            let candidate = if len == 1 {
                tokens[i].clone()
            } else {
                tokens[i..i + len].join(" ")
            };
            if let Some(s) = lex.severity(&candidate) {
                count += 1;
                severity += s;
                matched = len;
                break;
            }
        }
        i += matched.max(1);
    }
    (count, severity)
}

/// Non-overlapping occurrences of symbol patterns in the lowercased raw text.
pub fn hate_symbol_count(raw_text: &str, symbols: &Lexicon) -> usize {
    let text = raw_text.to_lowercase();
    symbols
        .terms()
        .map(|term| {
            if term == ECHO_TEMPLATE {
                ECHO.find_iter(&text).count()
            } else {
                text.matches(term).count()
            }
        })
        .sum()
}

/// Token-exact swear matches, with multiplicity.
pub fn obscenity_count(tokens: &[String], swears: &Lexicon) -> usize {
    tokens.iter().filter(|t| swears.contains(t)).count()
}

/// Whether in-group and out-group pronouns co-occur, and the number of
/// (in-group, out-group) token pairs.
pub fn othering_score(tokens: &[String], inv: &PronounInventory) -> (bool, usize) {
    let ingroup = tokens.iter().filter(|t| inv.is_ingroup(t)).count();
    let outgroup = tokens.iter().filter(|t| inv.is_outgroup(t)).count();
    let pairs = ingroup * outgroup;
    (pairs > 0, pairs)
}

/// Signed valence hits, each flipped when a negator appears among the four
/// preceding tokens, divided by the square root of the number of
/// non-negator tokens and clamped to [-1, 1].
pub fn sentiment_polarity(
    tokens: &[String],
    valence: &BTreeMap<String, i8>,
    negators: &BTreeSet<String>,
) -> f64 {
    let content = tokens.iter().filter(|t| !negators.contains(*t)).count();
    if content == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (i, t) in tokens.iter().enumerate() {
        if let Some(&sign) = valence.get(t) {
            let negated = tokens[i.saturating_sub(4)..i]
                .iter()
                .any(|p| negators.contains(p));
            let s = f64::from(sign);
            sum += if negated { -s } else { s };
        }
    }
    (sum / (content as f64).sqrt()).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::lexicon::Lexicons;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn lex(entries: &[(&str, f64)], mode: MatchMode) -> Lexicon {
        Lexicon::new("t", entries.iter().map(|(t, s)| (t.to_string(), *s)), mode).unwrap()
    }

    #[test]
    fn hate_terms_sum_and_multiplicity() {
        let l = lex(&[("grexlin", 40.0), ("vornak", 70.0)], MatchMode::Phrase);
        assert_eq!(hate_lexicon_features(&toks("a grexlin and a vornak"), &l), (2, 110.0));
        assert_eq!(hate_lexicon_features(&toks("nothing here"), &l), (0, 0.0));
        let l = lex(&[("zibbet", 55.0)], MatchMode::Phrase);
        assert_eq!(hate_lexicon_features(&toks("zibbet zibbet"), &l), (2, 110.0));
    }

    #[test]
    fn phrase_versus_token_mode() {
        let entries = [("swamp dweller", 60.0), ("dweller", 10.0)];
        let phrase = lex(&entries, MatchMode::Phrase);
        assert_eq!(hate_lexicon_features(&toks("a swamp dweller"), &phrase), (1, 60.0));
        let token = lex(&entries, MatchMode::Token);
        assert_eq!(hate_lexicon_features(&toks("a swamp dweller"), &token), (1, 10.0));
    }

    #[test]
    fn symbols() {
        let s = Lexicons::builtin().symbols;
        assert_eq!(hate_symbol_count("(((media))) at it again", &s), 1);
        assert_eq!(hate_symbol_count("1488 forever", &s), 1);
        assert_eq!(hate_symbol_count("(media)", &s), 0);
        assert_eq!(hate_symbol_count("((( Bankers ))) and (((media)))", &s), 2);
    }

    #[test]
    fn obscenity() {
        let l = lex(&[("flark", 1.0)], MatchMode::Token);
        assert_eq!(obscenity_count(&toks("flark this flark"), &l), 2);
        assert_eq!(obscenity_count(&[], &l), 0);
        assert_eq!(obscenity_count(&toks("flarkish"), &l), 0);
    }

    #[test]
    fn othering_examples() {
        let inv = PronounInventory::default();
        assert_eq!(othering_score(&toks("they want to take our jobs"), &inv), (true, 1));
        assert_eq!(othering_score(&toks("we love our team"), &inv), (false, 0));
        assert_eq!(othering_score(&toks("us versus them versus them"), &inv), (true, 2));
    }

    #[test]
    fn sentiment_examples() {
        let l = Lexicons::builtin();
        assert_eq!(sentiment_polarity(&toks("good"), &l.valence, &l.negators), 1.0);
        assert_eq!(sentiment_polarity(&toks("not good"), &l.valence, &l.negators), -1.0);
        assert_eq!(sentiment_polarity(&toks("the cat sat"), &l.valence, &l.negators), 0.0);
        // 1 / sqrt(4)
        assert_eq!(sentiment_polarity(&toks("a good day out"), &l.valence, &l.negators), 0.5);
        // negator five tokens back is outside the window
        assert_eq!(
            sentiment_polarity(&toks("not a b c d good"), &l.valence, &l.negators),
            1.0 / 5f64.sqrt()
        );
    }
}
