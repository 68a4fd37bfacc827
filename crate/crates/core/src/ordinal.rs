//! Frank-Hall decomposition of the clean < offensive < hate scale into two
//! binary problems, and the abstention zone.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::corpus::SeverityLabel;
use crate::error::{Error, Result};
use crate::learners::{fit_binary, BinaryModel, LearnerConfig};

pub const DEFAULT_ABSTAIN_THRESHOLD: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityDistribution {
    pub p_clean: f64,
    pub p_offensive: f64,
    pub p_hate: f64,
    pub abstained: bool,
}

impl SeverityDistribution {
    /// Normalizes `p` and flags abstention when the largest component is
    /// strictly below `threshold`.
    pub fn from_probs(p: [f64; 3], threshold: f64) -> Self {
        let s: f64 = p.iter().sum();
        let p = if s > 0.0 { p.map(|v| v / s) } else { [1.0 / 3.0; 3] };
        let max = p.iter().cloned().fold(f64::MIN, f64::max);
        Self {
            p_clean: p[0],
            p_offensive: p[1],
            p_hate: p[2],
            abstained: max < threshold,
        }
    }

    pub fn probs(&self) -> [f64; 3] {
        [self.p_clean, self.p_offensive, self.p_hate]
    }

    /// Argmax, with ties going to the less severe class.
    pub fn label(&self) -> SeverityLabel {
        let p = self.probs();
        let mut best = 0;
        for i in 1..3 {
            if p[i] > p[best] {
                best = i;
            }
        }
        SeverityLabel::from_index(best).unwrap()
    }

    /// The label, or `None` when abstained.
    pub fn decision(&self) -> Option<SeverityLabel> {
        (!self.abstained).then(|| self.label())
    }
}

/// `(1 - p_nc, p_nc - p_hate, p_hate)`, with a negative middle term clamped
/// to zero and the triple renormalized.
pub fn combine_probs(p_not_clean: f64, p_hate: f64, threshold: f64) -> SeverityDistribution {
    let p_nc = p_not_clean.clamp(0.0, 1.0);
    let p_h = p_hate.clamp(0.0, 1.0);
    let raw = [1.0 - p_nc, (p_nc - p_h).max(0.0), p_h];
    SeverityDistribution::from_probs(raw, threshold)
}

/// Binary targets `(label >= Offensive, label == Hate)`.
pub fn ordinal_targets(labels: &[SeverityLabel]) -> (Vec<bool>, Vec<bool>) {
    labels
        .iter()
        .map(|&l| (l >= SeverityLabel::Offensive, l == SeverityLabel::Hate))
        .unzip()
}

fn require_all_classes(labels: &[SeverityLabel]) -> Result<()> {
    let missing: Vec<&str> = SeverityLabel::ALL
        .iter()
        .filter(|c| !labels.contains(c))
        .map(|c| c.as_str())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "training labels lack class(es): {}",
            missing.join(", ")
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalClassifier {
    pub clf_not_clean: BinaryModel,
    pub clf_hate: BinaryModel,
    pub abstain_threshold: f64,
}

pub fn fit_ordinal(
    x: ArrayView2<f64>,
    labels: &[SeverityLabel],
    cfg: &LearnerConfig,
    abstain_threshold: f64,
) -> Result<OrdinalClassifier> {
    require_all_classes(labels)?;
    let (not_clean, hate) = ordinal_targets(labels);
    Ok(OrdinalClassifier {
        clf_not_clean: fit_binary(x, &not_clean, cfg)?,
        clf_hate: fit_binary(x, &hate, cfg)?,
        abstain_threshold,
    })
}

impl OrdinalClassifier {
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<SeverityDistribution> {
        let p_nc = self.clf_not_clean.predict_prob(x)?;
        let p_h = self.clf_hate.predict_prob(x)?;
        Ok(combine_probs(p_nc, p_h, self.abstain_threshold))
    }
}

/// Unordered baseline: one binary model per class, probabilities
/// normalized across the three.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsRest {
    pub models: Vec<BinaryModel>,
}

pub fn fit_one_vs_rest(x: ArrayView2<f64>, labels: &[SeverityLabel], cfg: &LearnerConfig) -> Result<OneVsRest> {
    require_all_classes(labels)?;
    let models = SeverityLabel::ALL
        .iter()
        .map(|&c| {
            let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            fit_binary(x, &y, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(OneVsRest { models })
}

impl OneVsRest {
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<SeverityDistribution> {
        let mut p = [0.0; 3];
        for (i, m) in self.models.iter().enumerate() {
            p[i] = m.predict_prob(x)?;
        }
        Ok(SeverityDistribution::from_probs(p, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LogisticParams;
    use ndarray::Array2;
    use proptest::prelude::*;
    use SeverityLabel::*;

    fn close(d: SeverityDistribution, e: [f64; 3]) {
        for (a, b) in d.probs().iter().zip(e) {
            assert!((a - b).abs() < 1e-12, "{:?} vs {e:?}", d.probs());
        }
    }

    #[test]
    fn combine_examples() {
        close(combine_probs(0.0, 0.0, 1.0 / 3.0), [1.0, 0.0, 0.0]);
        close(combine_probs(0.6, 0.2, 1.0 / 3.0), [0.4, 0.4, 0.2]);
        close(combine_probs(0.3, 0.5, 1.0 / 3.0), [0.7 / 1.2, 0.0, 0.5 / 1.2]);
    }

    #[test]
    fn decision_rules() {
        let t = DEFAULT_ABSTAIN_THRESHOLD;
        let d = SeverityDistribution::from_probs([0.4, 0.4, 0.2], t);
        assert_eq!(d.label(), Clean);
        let d = SeverityDistribution::from_probs([0.2, 0.2, 0.6], t);
        assert_eq!((d.label(), d.abstained), (Hate, false));
        let third = 1.0 / 3.0;
        let d = SeverityDistribution {
            p_clean: third,
            p_offensive: third,
            p_hate: third,
            abstained: third < t,
        };
        assert_eq!((d.label(), d.abstained), (Clean, false));
        let d = SeverityDistribution::from_probs([0.30, 0.32, 0.30], 0.35);
        assert_eq!(d.decision(), None);
    }

    #[test]
    fn targets() {
        let (nc, h) = ordinal_targets(&[Clean, Offensive, Hate]);
        assert_eq!(nc, [false, true, true]);
        assert_eq!(h, [false, false, true]);
    }

    #[test]
    fn missing_class_rejected() {
        let x = Array2::zeros((4, 2));
        let cfg = LearnerConfig::Logistic(LogisticParams::default());
        assert!(fit_ordinal(x.view(), &[Clean; 4], &cfg, 1.0 / 3.0).is_err());
    }

    proptest! {
        #[test]
        fn always_a_simplex(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let d = combine_probs(a, b, DEFAULT_ABSTAIN_THRESHOLD);
            let p = d.probs();
            prop_assert!(p.iter().all(|v| *v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(!d.abstained);
        }

        #[test]
        fn clean_decreases_with_not_clean(a in 0.0f64..0.99, da in 0.001f64..0.01, b in 0.0f64..0.5) {
            prop_assume!(a >= b && a + da <= 1.0);
            let lo = combine_probs(a, b, 0.0).p_clean;
            let hi = combine_probs(a + da, b, 0.0).p_clean;
            prop_assert!(hi < lo);
        }
    }

    #[test]
    fn grid_is_simplex() {
        for i in 0..=20 {
            for j in 0..=20 {
                let p = combine_probs(i as f64 / 20.0, j as f64 / 20.0, 0.0).probs();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
