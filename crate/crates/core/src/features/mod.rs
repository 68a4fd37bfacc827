//! Handcrafted message features: dictionary semantics, syntax and
//! plural-noun log-odds.

pub mod lexicon;
pub mod log_odds;
pub mod semantic;
pub mod syntactic;
pub mod tagger;

use serde::{Deserialize, Serialize};

pub use lexicon::{Lexicon, Lexicons, MatchMode, PronounInventory};
pub use log_odds::{fit_weighted_log_odds, log_odds_features, LogOddsModel};
pub use semantic::{hate_lexicon_features, hate_symbol_count, obscenity_count, othering_score, sentiment_polarity};
pub use syntactic::{syllable_count, syntactic_features, SyntacticFeatures};
pub use tagger::{plural_nouns, HeuristicTagger, PosTagger};

use crate::preprocess::CleanMessage;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub hate_term_count: f64,
    pub hate_severity_sum: f64,
    pub hate_symbol_count: f64,
    pub obscenity_count: f64,
    pub othering_pair_count: f64,
    pub sentiment: f64,
    pub word_count: f64,
    pub sentence_count: f64,
    pub punct_count: f64,
    pub pronoun_count: f64,
    pub negation_count: f64,
    pub lexical_density: f64,
    pub flesch_reading_ease: f64,
    pub char_count: f64,
    pub log_odds_clean: f64,
    pub log_odds_offensive: f64,
    pub log_odds_hate: f64,
}

impl FeatureRecord {
    pub const LEN: usize = 17;

    pub const NAMES: [&'static str; Self::LEN] = [
        "hate_term_count",
        "hate_severity_sum",
        "hate_symbol_count",
        "obscenity_count",
        "othering_pair_count",
        "sentiment",
        "word_count",
        "sentence_count",
        "punct_count",
        "pronoun_count",
        "negation_count",
        "lexical_density",
        "flesch_reading_ease",
        "char_count",
        "log_odds_clean",
        "log_odds_offensive",
        "log_odds_hate",
    ];

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.hate_term_count,
            self.hate_severity_sum,
            self.hate_symbol_count,
            self.obscenity_count,
            self.othering_pair_count,
            self.sentiment,
            self.word_count,
            self.sentence_count,
            self.punct_count,
            self.pronoun_count,
            self.negation_count,
            self.lexical_density,
            self.flesch_reading_ease,
            self.char_count,
            self.log_odds_clean,
            self.log_odds_offensive,
            self.log_odds_hate,
        ]
    }

    pub fn with_log_odds(mut self, z: [f64; 3]) -> Self {
        self.log_odds_clean = z[0];
        self.log_odds_offensive = z[1];
        self.log_odds_hate = z[2];
        self
    }
}

/// Everything computed from a message that does not depend on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFeatures {
    /// Record with the log-odds fields left at zero.
    pub record: FeatureRecord,
    pub plural_nouns: Vec<String>,
}

#[derive(Debug)]
pub struct FeatureExtractor {
    lexicons: Lexicons,
    tagger: Box<dyn PosTagger>,
}

impl FeatureExtractor {
    pub fn new(lexicons: Lexicons, tagger: Box<dyn PosTagger>) -> Self {
        Self { lexicons, tagger }
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    pub fn base(&self, raw_text: &str, cm: &CleanMessage) -> BaseFeatures {
        let l = &self.lexicons;
        let tokens = &cm.tokens;
        let (hate_count, severity) = hate_lexicon_features(tokens, &l.hate);
        let (_, pairs) = othering_score(tokens, &l.pronouns);
        let syn = syntactic_features(cm, &l.stopwords, &l.pronouns, &l.negators);
        let record = FeatureRecord {
            hate_term_count: hate_count as f64,
            hate_severity_sum: severity,
            hate_symbol_count: hate_symbol_count(raw_text, &l.symbols) as f64,
            obscenity_count: obscenity_count(tokens, &l.swears) as f64,
            othering_pair_count: pairs as f64,
            sentiment: sentiment_polarity(tokens, &l.valence, &l.negators),
            word_count: syn.word_count,
            sentence_count: syn.sentence_count,
            punct_count: syn.punct_count,
            pronoun_count: syn.pronoun_count,
            negation_count: syn.negation_count,
            lexical_density: syn.lexical_density,
            flesch_reading_ease: syn.flesch_reading_ease,
            char_count: syn.char_count,
            ..FeatureRecord::default()
        };
        BaseFeatures {
            record,
            plural_nouns: self.tagger.plural_nouns(tokens),
        }
    }

    pub fn extract(&self, raw_text: &str, cm: &CleanMessage, model: &LogOddsModel) -> FeatureRecord {
        let base = self.base(raw_text, cm);
        base.record.with_log_odds(log_odds_features(&base.plural_nouns, model))
    }
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::new(Lexicons::builtin(), Box::new(HeuristicTagger::default()))
    }
}
