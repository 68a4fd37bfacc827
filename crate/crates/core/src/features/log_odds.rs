//! Weighted log-odds with an informative Dirichlet prior over plural nouns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::SeverityLabel;
use crate::error::{Error, Result};
use crate::serial::{ArrayBlob, Envelope, Persist};

/// Per-noun, per-class z-scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LogOddsModel {
    prior_scale: f64,
    zscore: BTreeMap<String, [f64; 3]>,
}

impl LogOddsModel {
    pub fn empty(prior_scale: f64) -> Self {
        Self {
            prior_scale,
            zscore: BTreeMap::new(),
        }
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.zscore.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.zscore.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zscore.is_empty()
    }

    pub fn zscore(&self, noun: &str) -> Option<[f64; 3]> {
        self.zscore.get(noun).copied()
    }
}

/// Fits z-scored log-odds for every noun in `docs`.
///
/// The prior for noun `w` is `alpha_w = prior_scale * y_w / n`, so the
/// pseudo-counts sum to `alpha_0 = prior_scale`. When a complement count
/// is not positive (a class holds every noun occurrence) the score is 0.
pub fn fit_weighted_log_odds<S: AsRef<str>>(
    docs: &[(Vec<S>, SeverityLabel)],
    prior_scale: f64,
) -> Result<LogOddsModel> {
    if !(prior_scale > 0.0 && prior_scale.is_finite()) {
        return Err(Error::invalid(format!("prior_scale must be positive, got {prior_scale}")));
    }
    let mut counts: BTreeMap<String, [f64; 3]> = BTreeMap::new();
    let mut class_total = [0.0; 3];
    for (nouns, label) in docs {
        let c = label.index();
        for w in nouns {
            counts.entry(w.as_ref().to_string()).or_insert([0.0; 3])[c] += 1.0;
            class_total[c] += 1.0;
        }
    }
    let n: f64 = class_total.iter().sum();
    let alpha0 = prior_scale;
    let zscore = counts
        .into_iter()
        .map(|(w, y)| {
            let y_w: f64 = y.iter().sum();
            let alpha_w = prior_scale * y_w / n;
            let mut z = [0.0; 3];
            for i in 0..3 {
                let a = y[i] + alpha_w;
                let b = class_total[i] + alpha0 - y[i] - alpha_w;
                let c = y_w - y[i] + alpha_w;
                let d = n - class_total[i] + alpha0 - y_w + y[i] - alpha_w;
                if a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0 {
                    let delta = (a / b).ln() - (c / d).ln();
                    z[i] = delta / (1.0 / a + 1.0 / c).sqrt();
                }
            }
            (w, z)
        })
        .collect();
    Ok(LogOddsModel { prior_scale, zscore })
}

/// Per-class sums of the z-scores of `nouns`; unseen nouns add nothing.
pub fn log_odds_features<S: AsRef<str>>(nouns: &[S], m: &LogOddsModel) -> [f64; 3] {
    let mut out = [0.0; 3];
    for w in nouns {
        if let Some(z) = m.zscore.get(w.as_ref()) {
            for i in 0..3 {
                out[i] += z[i];
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct Params {
    prior_scale: f64,
    vocabulary: Vec<String>,
}

impl Persist for LogOddsModel {
    const KIND: &'static str = "log_odds";

    fn to_envelope(&self) -> Envelope {
        let flat: Vec<f64> = self.zscore.values().flat_map(|z| z.iter().copied()).collect();
        Envelope::new(
            Self::KIND,
            Params {
                prior_scale: self.prior_scale,
                vocabulary: self.zscore.keys().cloned().collect(),
            },
        )
        .with_array("zscore", ArrayBlob::from_slice(vec![self.zscore.len(), 3], &flat))
    }

    fn from_envelope(env: &Envelope) -> Result<Self> {
        let p: Params = env.params()?;
        let z = env.array("zscore")?.values()?;
        if z.len() != p.vocabulary.len() * 3 {
            return Err(Error::Format("log-odds vocabulary and score table disagree".into()));
        }
        let zscore = p
            .vocabulary
            .into_iter()
            .zip(z.chunks_exact(3))
            .map(|(w, c)| (w, [c[0], c[1], c[2]]))
            .collect();
        Ok(Self {
            prior_scale: p.prior_scale,
            zscore,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SeverityLabel::*;

    /// Straight transcription of the Monroe et al. estimator, recounting
    /// everything from the raw message list for each (noun, class) pair.
    fn oracle(docs: &[(Vec<String>, SeverityLabel)], scale: f64, word: &str, class: SeverityLabel) -> f64 {
        let occurrences = |pred: &dyn Fn(SeverityLabel) -> bool, only: Option<&str>| -> f64 {
            docs.iter()
                .filter(|(_, l)| pred(*l))
                .flat_map(|(ws, _)| ws.iter())
                .filter(|w| only.is_none_or(|o| o == w.as_str()))
                .count() as f64
        };
        let y_wi = occurrences(&|l| l == class, Some(word));
        let y_wj = occurrences(&|l| l != class, Some(word));
        let n_i = occurrences(&|l| l == class, None);
        let n_j = occurrences(&|l| l != class, None);
        let y_w = y_wi + y_wj;
        let n = n_i + n_j;
        let alpha_w = scale * y_w / n;
        let alpha_0 = scale;
        let num_i = y_wi + alpha_w;
        let den_i = n_i + alpha_0 - y_wi - alpha_w;
        let num_j = y_wj + alpha_w;
        let den_j = n_j + alpha_0 - y_wj - alpha_w;
        if [num_i, den_i, num_j, den_j].iter().any(|v| *v <= 0.0) {
            return 0.0;
        }
        let delta = (num_i / den_i).ln() - (num_j / den_j).ln();
        let sigma2 = 1.0 / num_i + 1.0 / num_j;
        delta / sigma2.sqrt()
    }

    fn doc(ws: &[&str], l: SeverityLabel) -> (Vec<String>, SeverityLabel) {
        (ws.iter().map(|s| s.to_string()).collect(), l)
    }

    fn balanced_with(word_hate: usize) -> Vec<(Vec<String>, SeverityLabel)> {
        let mut docs = Vec::new();
        for l in SeverityLabel::ALL {
            for i in 0..10 {
                docs.push(doc(&[&format!("fillers{}", i % 3), "things"], l));
            }
        }
        for _ in 0..word_hate {
            docs.push(doc(&["grexlins"], Hate));
        }
        docs
    }

    #[test]
    fn exclusive_noun_scores_highest_for_its_class() {
        let m = fit_weighted_log_odds(&balanced_with(10), 1.0).unwrap();
        let z = m.zscore("grexlins").unwrap();
        assert!(z[2] > 0.0);
        assert!(z[2] > z[0] && z[2] > z[1]);
    }

    #[test]
    fn uniform_noun_scores_near_zero() {
        let m = fit_weighted_log_odds(&balanced_with(0), 1.0).unwrap();
        for z in m.zscore("things").unwrap() {
            assert!(z.abs() < 0.1, "{z}");
        }
    }

    #[test]
    fn vocabulary_is_training_nouns() {
        let docs = vec![doc(&["cats", "dogs"], Clean), doc(&["dogs"], Hate), doc(&[], Offensive)];
        let m = fit_weighted_log_odds(&docs, 1.0).unwrap();
        assert_eq!(m.vocabulary().collect::<Vec<_>>(), ["cats", "dogs"]);
        let empty: Vec<(Vec<String>, SeverityLabel)> = vec![doc(&[], Clean)];
        assert!(fit_weighted_log_odds(&empty, 1.0).unwrap().is_empty());
    }

    #[test]
    fn feature_sums() {
        let mut m = LogOddsModel::empty(1.0);
        m.zscore.insert("refugees".into(), [-1.2, 0.3, 2.4]);
        m.zscore.insert("jobs".into(), [0.5, 0.5, -1.0]);
        assert_eq!(log_odds_features::<&str>(&[], &m), [0.0; 3]);
        assert_eq!(log_odds_features(&["refugees"], &m), [-1.2, 0.3, 2.4]);
        let two = log_odds_features(&["refugees", "jobs", "unseen"], &m);
        let expect = [-1.2 + 0.5, 0.3 + 0.5, 2.4 - 1.0];
        for i in 0..3 {
            assert!((two[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn persist_round_trip() {
        let m = fit_weighted_log_odds(&balanced_with(4), 0.5).unwrap();
        let back = LogOddsModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
    }

    fn corpus() -> impl Strategy<Value = Vec<(Vec<String>, SeverityLabel)>> {
        let label = prop_oneof![Just(Clean), Just(Offensive), Just(Hate)];
        let nouns = proptest::collection::vec((0u8..12).prop_map(|i| format!("nouns{i}")), 0..6);
        proptest::collection::vec((nouns, label), 3..40)
    }

    proptest! {
        #[test]
        fn matches_independent_oracle(docs in corpus(), scale in 0.05f64..5.0) {
            prop_assume!(docs.iter().any(|(w, _)| !w.is_empty()));
            let m = fit_weighted_log_odds(&docs, scale).unwrap();
            for w in m.vocabulary() {
                let z = m.zscore(w).unwrap();
                for l in SeverityLabel::ALL {
                    let o = oracle(&docs, scale, w, l);
                    prop_assert!((z[l.index()] - o).abs() <= 1e-9, "{w} {l}: {} vs {o}", z[l.index()]);
                }
            }
        }
    }
}
