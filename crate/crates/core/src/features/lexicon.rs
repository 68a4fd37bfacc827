//! Dictionary resources: scored term lexicons, sign lexicons, word lists and
//! the in-group/out-group pronoun inventory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How lexicon entries are matched against a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Single tokens only; multi-word entries never match.
    Token,
    /// Contiguous token sequences, longest match first.
    Phrase,
    /// Literal substrings of the lowercased raw text.
    Substring,
}

/// Template entry for the triple-parenthesis echo symbol.
pub const ECHO_TEMPLATE: &str = "((( word )))";

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    name: String,
    entries: BTreeMap<String, f64>,
    match_mode: MatchMode,
    max_phrase_len: usize,
}

impl Lexicon {
    pub fn new(
        name: impl Into<String>,
        entries: impl IntoIterator<Item = (String, f64)>,
        match_mode: MatchMode,
    ) -> Result<Self> {
        let name = name.into();
        let mut map = BTreeMap::new();
        for (term, severity) in entries {
            let term = term.trim().to_lowercase();
            if term.is_empty() {
                return Err(Error::invalid(format!("lexicon `{name}`: empty term")));
            }
            if !(1.0..=100.0).contains(&severity) {
                return Err(Error::invalid(format!(
                    "lexicon `{name}`: severity {severity} of `{term}` outside [1, 100]"
                )));
            }
            map.insert(term, severity);
        }
        let max_phrase_len = map
            .keys()
            .map(|t| t.split_whitespace().count())
            .max()
            .unwrap_or(0);
        Ok(Self {
            name,
            entries: map,
            match_mode,
            max_phrase_len,
        })
    }

    /// Parses `term<TAB>severity` lines; `#` starts a comment and a missing
    /// severity column means 1.
    pub fn parse_tsv(name: &str, text: &str, match_mode: MatchMode) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = strip_comment(line);
            if line.trim().is_empty() {
                continue;
            }
            let (term, sev) = match line.split_once('\t') {
                Some((t, s)) => {
                    let sev = s.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        message: format!("lexicon `{name}`: bad severity `{}`: {e}", s.trim()),
                    })?;
                    (t, sev)
                }
                None => (line, 1.0),
            };
            entries.push((term.to_string(), sev));
        }
        Self::new(name, entries, match_mode)
    }

    pub fn load(path: &Path, name: &str, match_mode: MatchMode) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(name, &text, match_mode)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn match_mode(&self) -> MatchMode {
        self.match_mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn severity(&self, term: &str) -> Option<f64> {
        self.entries.get(term).copied()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.entries.contains_key(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    /// SHA-256 over the canonical entry listing and match mode.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}\n", self.match_mode));
        for (t, s) in &self.entries {
            h.update(format!("{t}\t{s}\n"));
        }
        hex::encode(h.finalize())
    }
}

fn strip_comment(line: &str) -> &str {
    // `#` only starts a comment at line start or after whitespace so that
    // terms containing `#` stay usable
    if line.trim_start().starts_with('#') {
        return "";
    }
    match line.find(" #") {
        Some(p) => &line[..p],
        None => line,
    }
}

/// Parses a one-token-per-line list.
pub fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(strip_comment)
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn load_word_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_word_list(&text))
}

/// Parses a `term<TAB>+1|-1` sign lexicon.
pub fn parse_valence(text: &str) -> Result<BTreeMap<String, i8>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = strip_comment(line);
        if line.trim().is_empty() {
            continue;
        }
        let (term, sign) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "valence line needs term<TAB>sign".into(),
        })?;
        let sign: f64 = sign.trim().parse().map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("bad valence `{}`: {e}", sign.trim()),
        })?;
        let sign = if sign > 0.0 {
            1
        } else if sign < 0.0 {
            -1
        } else {
            return Err(Error::Parse {
                line: i + 1,
                message: "valence must be nonzero".into(),
            });
        };
        out.insert(term.trim().to_lowercase(), sign);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PronounInventory {
    ingroup: BTreeSet<String>,
    outgroup: BTreeSet<String>,
}

impl PronounInventory {
    pub fn new(ingroup: BTreeSet<String>, outgroup: BTreeSet<String>) -> Result<Self> {
        if let Some(p) = ingroup.intersection(&outgroup).next() {
            return Err(Error::invalid(format!(
                "pronoun `{p}` is in both the in-group and out-group lists"
            )));
        }
        Ok(Self { ingroup, outgroup })
    }

    pub fn is_ingroup(&self, t: &str) -> bool {
        self.ingroup.contains(t)
    }

    pub fn is_outgroup(&self, t: &str) -> bool {
        self.outgroup.contains(t)
    }

    pub fn ingroup(&self) -> &BTreeSet<String> {
        &self.ingroup
    }

    pub fn outgroup(&self) -> &BTreeSet<String> {
        &self.outgroup
    }
}

impl Default for PronounInventory {
    fn default() -> Self {
        let set = |s: &str| parse_word_list(s);
        Self::new(
            set(include_str!("../../data/pronouns_ingroup.txt")),
            set(include_str!("../../data/pronouns_outgroup.txt")),
        )
        .expect("built-in pronoun lists are disjoint")
    }
}

/// Every dictionary resource feature extraction needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicons {
    pub hate: Lexicon,
    pub symbols: Lexicon,
    pub swears: Lexicon,
    pub valence: BTreeMap<String, i8>,
    pub negators: BTreeSet<String>,
    pub stopwords: BTreeSet<String>,
    pub pronouns: PronounInventory,
}

impl Lexicons {
    /// The synthetic stand-in resources shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            hate: Lexicon::parse_tsv("hate", include_str!("../../data/hate_terms.tsv"), MatchMode::Phrase)
                .expect("built-in hate lexicon"),
            symbols: Lexicon::parse_tsv(
                "symbols",
                include_str!("../../data/hate_symbols.tsv"),
                MatchMode::Substring,
            )
            .expect("built-in symbol lexicon"),
            swears: Lexicon::parse_tsv("swears", include_str!("../../data/profanity.tsv"), MatchMode::Token)
                .expect("built-in profanity lexicon"),
            valence: parse_valence(include_str!("../../data/valence.tsv")).expect("built-in valence"),
            negators: parse_word_list(include_str!("../../data/negators.txt")),
            stopwords: parse_word_list(include_str!("../../data/stopwords.txt")),
            pronouns: PronounInventory::default(),
        }
    }

    /// Per-resource SHA-256 digests, recorded in model manifests so that a
    /// model is never applied with different dictionaries than it was fit on.
    pub fn digests(&self) -> BTreeMap<String, String> {
        let list_digest = |items: &mut dyn Iterator<Item = String>| {
            let mut h = Sha256::new();
            for i in items {
                h.update(i.as_bytes());
                h.update(b"\n");
            }
            hex::encode(h.finalize())
        };
        let mut out = BTreeMap::new();
        out.insert("hate".into(), self.hate.digest());
        out.insert("symbols".into(), self.symbols.digest());
        out.insert("swears".into(), self.swears.digest());
        out.insert(
            "valence".into(),
            list_digest(&mut self.valence.iter().map(|(t, s)| format!("{t}\t{s}"))),
        );
        out.insert("negators".into(), list_digest(&mut self.negators.iter().cloned()));
        out.insert("stopwords".into(), list_digest(&mut self.stopwords.iter().cloned()));
        out.insert(
            "pronouns".into(),
            list_digest(
                &mut self
                    .pronouns
                    .ingroup
                    .iter()
                    .map(|p| format!("in\t{p}"))
                    .chain(self.pronouns.outgroup.iter().map(|p| format!("out\t{p}"))),
            ),
        );
        out
    }
}

impl Default for Lexicons {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_resources_parse() {
        let l = Lexicons::builtin();
        assert_eq!(l.hate.severity("grexlin"), Some(72.0));
        assert_eq!(l.hate.max_phrase_len(), 2);
        assert!(l.symbols.contains(ECHO_TEMPLATE));
        assert_eq!(l.valence["good"], 1);
        assert_eq!(l.valence["awful"], -1);
        assert!(l.negators.contains("don't"));
        assert!(l.pronouns.is_ingroup("our") && l.pronouns.is_outgroup("they"));
        assert_eq!(l.digests().len(), 7);
    }

    #[test]
    fn tsv_rules() {
        let lex = Lexicon::parse_tsv("t", "# comment\nFoo\t40\nbar baz\t70\nqux\n", MatchMode::Phrase).unwrap();
        assert_eq!(lex.severity("foo"), Some(40.0));
        assert_eq!(lex.severity("qux"), Some(1.0));
        assert_eq!(lex.max_phrase_len(), 2);
        assert!(Lexicon::parse_tsv("t", "foo\t0\n", MatchMode::Token).is_err());
        assert!(Lexicon::parse_tsv("t", "foo\t101\n", MatchMode::Token).is_err());
        assert!(Lexicon::parse_tsv("t", "foo\tabc\n", MatchMode::Token).is_err());
    }

    #[test]
    fn pronoun_sets_must_be_disjoint() {
        let a: BTreeSet<String> = ["we".to_string()].into();
        assert!(PronounInventory::new(a.clone(), a).is_err());
    }

    #[test]
    fn digest_changes_with_content() {
        let a = Lexicon::parse_tsv("t", "foo\t40\n", MatchMode::Token).unwrap();
        let b = Lexicon::parse_tsv("t", "foo\t41\n", MatchMode::Token).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
    }
}
