//! Plural-noun detection behind a pluggable tagger interface.

use std::collections::BTreeSet;
use std::fmt::Debug;

/// Anything that can pick the plural nouns out of a token sequence.
pub trait PosTagger: Send + Sync + Debug {
    fn plural_nouns(&self, tokens: &[String]) -> Vec<String>;
}

const NOT_PLURAL: &[&str] = &[
    "is", "was", "has", "does", "this", "his", "its", "us", "yes", "thus", "plus", "always",
    "perhaps", "sometimes", "ours", "yours", "theirs", "hers", "whereas", "unless", "across",
    "less", "besides", "towards", "afterwards", "nevertheless", "news", "series", "species",
    "says", "goes", "gets", "makes", "takes", "wants", "needs", "thinks", "knows", "seems",
    "looks", "comes", "gives", "keeps", "tells", "means", "lets", "puts", "becomes", "happens",
    "tries", "believes", "feels", "leaves", "calls", "shows", "uses", "runs", "sees", "hates",
    "loves", "likes", "lies", "stays", "starts", "helps", "talks", "turns", "brings", "sits",
    "stands", "pays", "plays", "reads", "writes", "kills", "lives", "works", "wins", "loses",
    "yes", "whats", "thats", "lets", "itis", "as", "was", "gas", "bus", "thanks",
];

const IRREGULAR: &[&str] = &[
    "men", "women", "children", "people", "mice", "geese", "feet", "teeth", "police", "cattle",
    "criteria", "phenomena", "oxen", "dice", "lice", "clergy",
];

/// Suffix rule with an exception list and an irregular-plural dictionary.
#[derive(Debug, Clone)]
pub struct HeuristicTagger {
    not_plural: BTreeSet<String>,
    irregular: BTreeSet<String>,
}

impl HeuristicTagger {
    pub fn with_extra_exceptions(mut self, words: impl IntoIterator<Item = String>) -> Self {
        self.not_plural.extend(words);
        self
    }

    pub fn is_plural_noun(&self, t: &str) -> bool {
        if self.irregular.contains(t) {
            return true;
        }
        t.len() >= 4
            && t.bytes().all(|b| b.is_ascii_lowercase())
            && t.ends_with('s')
            && !t.ends_with("ss")
            && !t.ends_with("us")
            && !t.ends_with("is")
            && !self.not_plural.contains(t)
    }
}

impl Default for HeuristicTagger {
    fn default() -> Self {
        Self {
            not_plural: NOT_PLURAL.iter().map(|s| s.to_string()).collect(),
            irregular: IRREGULAR.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl PosTagger for HeuristicTagger {
    fn plural_nouns(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .filter(|t| self.is_plural_noun(t))
            .cloned()
            .collect()
    }
}

pub fn plural_nouns(tokens: &[String], tagger: &dyn PosTagger) -> Vec<String> {
    tagger.plural_nouns(tokens)
}
