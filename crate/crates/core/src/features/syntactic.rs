//! Counts, negation, lexical density and Flesch reading ease.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::lexicon::PronounInventory;
use crate::preprocess::CleanMessage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntacticFeatures {
    pub word_count: f64,
    pub sentence_count: f64,
    pub punct_count: f64,
    pub pronoun_count: f64,
    pub negation_count: f64,
    pub lexical_density: f64,
    pub flesch_reading_ease: f64,
    pub char_count: f64,
}

/// Maximal vowel groups (`aeiouy`), minus one for a silent final `e` when
/// that leaves at least one, never less than one.
pub fn syllable_count(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(char::is_ascii_alphabetic)
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    if letters.last() == Some(&'e') && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

pub fn flesch_reading_ease(words: usize, sentences: usize, syllables: usize) -> f64 {
    let words = words.max(1) as f64;
    let sentences = sentences.max(1) as f64;
    206.835 - 1.015 * (words / sentences) - 84.6 * (syllables as f64 / words)
}

pub fn lexical_density(tokens: &[String], stopwords: &BTreeSet<String>) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let content = tokens.iter().filter(|t| !stopwords.contains(*t)).count();
    content as f64 / tokens.len() as f64
}

pub fn syntactic_features(
    cm: &CleanMessage,
    stopwords: &BTreeSet<String>,
    pronouns: &PronounInventory,
    negators: &BTreeSet<String>,
) -> SyntacticFeatures {
    let tokens = &cm.tokens;
    let pronoun_count = tokens
        .iter()
        .filter(|t| pronouns.is_ingroup(t) || pronouns.is_outgroup(t))
        .count();
    let negation_count = tokens.iter().filter(|t| negators.contains(*t)).count();
    let syllables: usize = tokens.iter().map(|t| syllable_count(t)).sum();
    SyntacticFeatures {
        word_count: tokens.len() as f64,
        sentence_count: cm.sentence_count as f64,
        punct_count: cm.punct_count as f64,
        pronoun_count: pronoun_count as f64,
        negation_count: negation_count as f64,
        lexical_density: lexical_density(tokens, stopwords),
        flesch_reading_ease: flesch_reading_ease(tokens.len(), cm.sentence_count, syllables),
        char_count: cm.char_count_original as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::lexicon::Lexicons;
    use crate::preprocess::clean_raw;

    #[test]
    fn syllables() {
        assert_eq!(syllable_count("cat"), 1);
        assert_eq!(syllable_count("spike"), 1);
        assert_eq!(syllable_count("beautiful"), 3);
        assert_eq!(syllable_count("the"), 1);
        assert_eq!(syllable_count("rhythm"), 1);
        assert_eq!(syllable_count("don't"), 1);
        assert_eq!(syllable_count("1488"), 1);
    }

    #[test]
    fn density_example() {
        let toks: Vec<String> = ["the", "big", "dog", "barked", "loudly"].map(String::from).into();
        let stop: BTreeSet<String> = ["the".to_string()].into();
        assert_eq!(lexical_density(&toks, &stop), 0.8);
    }

    #[test]
    fn flesch_the_cat_sat() {
        let l = Lexicons::builtin();
        let cm = clean_raw("x", "The cat sat.").unwrap();
        let f = syntactic_features(&cm, &l.stopwords, &l.pronouns, &l.negators);
        assert!((f.flesch_reading_ease - 119.19).abs() < 1e-9);
        assert_eq!(f.word_count, 3.0);
        assert_eq!(f.sentence_count, 1.0);
    }

    #[test]
    fn negation_hit() {
        let l = Lexicons::builtin();
        let cm = clean_raw("x", "don't stop").unwrap();
        let f = syntactic_features(&cm, &l.stopwords, &l.pronouns, &l.negators);
        assert_eq!(f.negation_count, 1.0);
    }

    #[test]
    fn flesch_decreases_with_syllables() {
        let mut prev = f64::INFINITY;
        for syl in 3..30 {
            let f = flesch_reading_ease(3, 1, syl);
            assert!(f < prev);
            prev = f;
        }
    }
}
