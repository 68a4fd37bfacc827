//! Seeded synthetic multi-platform corpora.
//!
//! Messages are bags of tokens drawn from class-conditional pools. Hate
//! messages usually carry a group slur (shared lexicon terms or invented
//! platform-only surrogates) and/or in-group versus out-group pronouns;
//! offensive messages carry swears without group targets. Each platform
//! adds words from its own marker vocabulary, so platforms differ in
//! distribution. Every slur and swear is an invented placeholder.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LabeledMessage, SeverityLabel};
use crate::error::{Error, Result};
use crate::rng::{derive, seeded, tag_of, Rng as ChaRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformProfile {
    pub name: String,
    /// Relative weights of clean, offensive and hate; normalized on use.
    pub mix: [f64; 3],
    pub markers: Vec<String>,
    /// Platform-only slur surrogates, absent from the shipped lexicon.
    pub slurs: Vec<String>,
    /// Share of slur uses drawn from `slurs` rather than the shared pool.
    pub platform_slur_share: f64,
    /// Probability that a hate message carries a slur or othering cue.
    pub hate_marked_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

const NEUTRAL: &str = "the a to and of in is it that for on was with as at be this have from \
    or by not but what all were when can said there use an each which do how if will up \
    about out many then so some would make like him into time has look two more write go \
    see number way could people my than first water been call who now find long down day \
    did get come made may part over new sound take only little work know place year live \
    back give most very after thing just name good sentence man think say great where \
    help through much before line right too mean old any same tell boy follow came want show";

const NEUTRAL_PLURALS: &str = "games friends cars books photos songs movies days weeks plans \
    ideas stories teams players kids parents neighbours prices taxes roads schools";

const POSITIVE: &str = "good great love happy nice wonderful beautiful thanks best fun";
const NEGATIVE: &str = "bad awful terrible sad angry hate ugly worst stupid disgusting";
const SHARED_SLURS: &str = "grexlins vornaks zibbets quandles morlocks skreevs dravvits";
const SWEARS: &str = "flark flarking skunder brakk gronch tharp muckle frell glorb zarking";
const TARGET_VERBS: &str = "invade replace ruin infest destroy flood";
const INGROUP: &str = "we us our";
const OUTGROUP: &str = "they them their";

impl PlatformProfile {
    fn build(name: &str, mix: [f64; 3], markers: &str, slurs: &str, share: f64, len: (usize, usize)) -> Self {
        Self {
            name: name.to_string(),
            mix,
            markers: words(markers),
            slurs: words(slurs),
            platform_slur_share: share,
            hate_marked_prob: 0.92,
            min_len: len.0,
            max_len: len.1,
        }
    }

    pub fn facebook() -> Self {
        Self::build(
            "facebook",
            [0.70, 0.12, 0.18],
            "timeline wallpost groupchat likepage shareit reactions feedpost fanpage",
            "snerdlings wozzlers brimkins",
            0.4,
            (8, 22),
        )
    }

    pub fn gab() -> Self {
        Self::build(
            "gab",
            [0.71, 0.13, 0.16],
            "gabbing repost frogpost freeze speechfree gabtrends shillpost normiefeed",
            "gorplings thrunkers vexals",
            0.4,
            (8, 20),
        )
    }

    pub fn twitter() -> Self {
        Self::build(
            "twitter",
            [0.43, 0.43, 0.14],
            "retweet hashtagged trending followback quotetweet mentions blueck tweetdeck",
            "plimbers quozzles drankets",
            0.9,
            (5, 12),
        )
    }

    pub fn stormfront() -> Self {
        Self::build(
            "stormfront",
            [0.87, 0.04, 0.10],
            "forumpost subforum threadstarter oldtimer brethren kinfolk homeland heritage",
            "murgles skantors blivers",
            0.6,
            (12, 30),
        )
    }

    pub fn reddit() -> Self {
        Self::build(
            "reddit",
            [0.60, 0.15, 0.25],
            "subreddit upvoted downvoted karmafarm crosspost modteam throwaway redditors",
            "frobbits glanters wumpkins",
            0.5,
            (8, 24),
        )
    }

    fn validate(&self) -> Result<()> {
        let s: f64 = self.mix.iter().sum();
        if self.mix.iter().any(|p| !(*p >= 0.0)) || !(s > 0.0) {
            return Err(Error::invalid(format!("profile `{}`: bad class mix", self.name)));
        }
        if self.markers.is_empty() || self.slurs.is_empty() {
            return Err(Error::invalid(format!("profile `{}`: empty vocabulary", self.name)));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::invalid(format!("profile `{}`: bad length range", self.name)));
        }
        Ok(())
    }
}

/// The four main profiles.
pub fn default_profiles() -> Vec<PlatformProfile> {
    vec![
        PlatformProfile::facebook(),
        PlatformProfile::gab(),
        PlatformProfile::twitter(),
        PlatformProfile::stormfront(),
    ]
}

pub fn profile_by_name(name: &str) -> Option<PlatformProfile> {
    default_profiles()
        .into_iter()
        .chain([PlatformProfile::reddit()])
        .find(|p| p.name == name)
}

struct Pools {
    neutral: Vec<String>,
    plurals: Vec<String>,
    positive: Vec<String>,
    negative: Vec<String>,
    shared_slurs: Vec<String>,
    swears: Vec<String>,
    verbs: Vec<String>,
    ingroup: Vec<String>,
    outgroup: Vec<String>,
}

impl Pools {
    fn new() -> Self {
        Self {
            neutral: words(NEUTRAL),
            plurals: words(NEUTRAL_PLURALS),
            positive: words(POSITIVE),
            negative: words(NEGATIVE),
            shared_slurs: words(SHARED_SLURS),
            swears: words(SWEARS),
            verbs: words(TARGET_VERBS),
            ingroup: words(INGROUP),
            outgroup: words(OUTGROUP),
        }
    }
}

fn pick<'a>(r: &mut ChaRng, v: &'a [String]) -> &'a str {
    v.choose(r).expect("non-empty pool")
}

fn draw_class(r: &mut ChaRng, mix: &[f64; 3]) -> SeverityLabel {
    let u: f64 = r.random::<f64>() * mix.iter().sum::<f64>();
    if u < mix[0] {
        SeverityLabel::Clean
    } else if u < mix[0] + mix[1] {
        SeverityLabel::Offensive
    } else {
        SeverityLabel::Hate
    }
}

fn message_tokens(r: &mut ChaRng, p: &PlatformProfile, pools: &Pools, class: SeverityLabel) -> Vec<String> {
    let len = r.random_range(p.min_len..=p.max_len);
    let mut special: Vec<String> = Vec::new();
    for _ in 0..r.random_range(1..=2) {
        special.push(pick(r, &p.markers).to_string());
    }
    match class {
        SeverityLabel::Clean => {
            if r.random_bool(0.5) {
                special.push(pick(r, &pools.positive).to_string());
            }
            if r.random_bool(0.4) {
                special.push(pick(r, &pools.plurals).to_string());
            }
            if r.random_bool(0.1) {
                special.push(pick(r, &pools.negative).to_string());
            }
            if r.random_bool(0.04) {
                special.push(pick(r, &pools.swears).to_string());
            }
            if r.random_bool(0.08) {
                special.push(pick(r, &pools.outgroup).to_string());
            }
        }
        SeverityLabel::Offensive => {
            if r.random_bool(0.9) {
                for _ in 0..r.random_range(1..=2) {
                    special.push(pick(r, &pools.swears).to_string());
                }
            }
            if r.random_bool(0.5) {
                special.push(pick(r, &pools.negative).to_string());
            }
            if r.random_bool(0.3) {
                special.push("you".into());
            }
            if r.random_bool(0.2) {
                special.push(pick(r, &pools.plurals).to_string());
            }
        }
        SeverityLabel::Hate => {
            if r.random_bool(p.hate_marked_prob) {
                let slur = r.random_bool(0.85);
                let othering = !slur || r.random_bool(0.5);
                if slur {
                    for _ in 0..r.random_range(1..=2) {
                        let s = if r.random_bool(p.platform_slur_share) {
                            pick(r, &p.slurs)
                        } else {
                            pick(r, &pools.shared_slurs)
                        };
                        special.push(s.to_string());
                    }
                    if r.random_bool(0.5) {
                        special.push(pick(r, &pools.verbs).to_string());
                    }
                }
                if othering {
                    special.push(pick(r, &pools.outgroup).to_string());
                    special.push(pick(r, &pools.ingroup).to_string());
                }
            } else {
                special.push(pick(r, &pools.plurals).to_string());
            }
            if r.random_bool(0.3) {
                special.push(pick(r, &pools.swears).to_string());
            }
            if r.random_bool(0.4) {
                special.push(pick(r, &pools.negative).to_string());
            }
        }
    }
    let filler = len.saturating_sub(special.len()).max(1);
    let mut tokens: Vec<String> = (0..filler).map(|_| pick(r, &pools.neutral).to_string()).collect();
    for s in special {
        let at = r.random_range(0..=tokens.len());
        tokens.insert(at, s);
    }
    tokens
}

fn render(r: &mut ChaRng, tokens: &[String], platform: &str) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if i == 0 {
            let mut cs = t.chars();
            if let Some(c) = cs.next() {
                out.extend(c.to_uppercase());
                out.push_str(cs.as_str());
            }
        } else {
            out.push_str(t);
        }
        if i + 1 < tokens.len() && r.random_bool(0.06) {
            out.push(',');
        }
    }
    out.push(*[".", "!", "?", "."].choose(r).unwrap().chars().next().as_ref().unwrap());
    if platform == "twitter" && r.random_bool(0.3) {
        out.push_str(" #");
        out.push_str(&tokens[0]);
    }
    if r.random_bool(0.05) {
        out.push_str(" https://example.org/news/");
        out.push_str(&tokens.iter().take(3).cloned().collect::<Vec<_>>().join("-"));
        out.push('/');
    }
    out
}

/// `n_per_platform` messages for each profile, with ids `<platform>-<index>`.
pub fn generate_corpus(profiles: &[PlatformProfile], n_per_platform: usize, seed: u64) -> Result<Dataset> {
    if n_per_platform < 30 {
        return Err(Error::invalid(format!(
            "synthetic corpora need at least 30 messages per platform, got {n_per_platform}"
        )));
    }
    let pools = Pools::new();
    let mut messages = Vec::with_capacity(profiles.len() * n_per_platform);
    for p in profiles {
        p.validate()?;
        let mut r = seeded(derive(seed, tag_of(&p.name)));
        for i in 0..n_per_platform {
            let class = draw_class(&mut r, &p.mix);
            let tokens = message_tokens(&mut r, p, &pools, class);
            let text = render(&mut r, &tokens, &p.name);
            messages.push(LabeledMessage::new(format!("{}-{i:05}", p.name), &p.name, text, Some(class)));
        }
    }
    Dataset::new(messages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Lexicons;
    use std::collections::BTreeSet;

    fn within_3_sigma(count: usize, n: usize, p: f64) -> bool {
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        (count as f64 - mean).abs() <= 3.0 * sd
    }

    #[test]
    fn class_mix_matches_profile() {
        for profile in [PlatformProfile::facebook(), PlatformProfile::stormfront()] {
            let d = generate_corpus(std::slice::from_ref(&profile), 1000, 42).unwrap();
            let counts = d.class_counts();
            let total: f64 = profile.mix.iter().sum();
            for c in 0..3 {
                let p = profile.mix[c] / total;
                assert!(within_3_sigma(counts[c], 1000, p), "{} {counts:?}", profile.name);
            }
        }
        assert_eq!(PlatformProfile::facebook().mix, [0.70, 0.12, 0.18]);
        assert_eq!(PlatformProfile::stormfront().mix, [0.87, 0.04, 0.10]);
        assert_eq!(PlatformProfile::gab().mix, [0.71, 0.13, 0.16]);
        assert_eq!(PlatformProfile::twitter().mix, [0.43, 0.43, 0.14]);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_corpus(&default_profiles(), 50, 7).unwrap();
        let b = generate_corpus(&default_profiles(), 50, 7).unwrap();
        let c = generate_corpus(&default_profiles(), 50, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn vocabularies_disjoint_and_slurs_unlisted() {
        let mut all = default_profiles();
        all.push(PlatformProfile::reddit());
        let lex = Lexicons::builtin();
        let mut seen = BTreeSet::new();
        for p in &all {
            for w in p.markers.iter().chain(&p.slurs) {
                assert!(seen.insert(w.clone()), "{w} reused");
            }
            for s in &p.slurs {
                assert!(!lex.hate.contains(s) && !lex.hate.contains(s.trim_end_matches('s')));
            }
        }
    }

    #[test]
    fn hate_messages_are_mostly_marked() {
        let d = generate_corpus(&default_profiles(), 500, 3).unwrap();
        let pools = Pools::new();
        let profiles = default_profiles();
        let mut hate = 0;
        let mut marked = 0;
        for m in d.messages().iter().filter(|m| m.label == Some(SeverityLabel::Hate)) {
            hate += 1;
            let p = profiles.iter().find(|p| p.name == m.platform).unwrap();
            let toks: Vec<String> = m
                .raw_text
                .to_lowercase()
                .split(|c: char| !c.is_alphanumeric())
                .map(str::to_string)
                .collect();
            let has = |pool: &[String]| toks.iter().any(|t| pool.contains(t));
            if has(&p.slurs) || has(&pools.shared_slurs) || (has(&pools.ingroup) && has(&pools.outgroup)) {
                marked += 1;
            }
        }
        assert!(marked as f64 / hate as f64 >= 0.88, "{marked}/{hate}");
    }

    #[test]
    fn rejects_degenerate_profiles() {
        let mut p = PlatformProfile::gab();
        p.markers.clear();
        assert!(generate_corpus(&[p], 100, 1).is_err());
        assert!(generate_corpus(&default_profiles(), 10, 1).is_err());
    }
}
