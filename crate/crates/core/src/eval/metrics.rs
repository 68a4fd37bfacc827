//! Confusion matrices and the per-class report built from them.

use serde::{Deserialize, Serialize};

use crate::corpus::SeverityLabel;
use crate::error::{Error, Result};
use crate::ordinal::SeverityDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstainMode {
    /// Abstentions stay in the denominator and count as misses.
    #[default]
    AsError,
    /// Abstentions are dropped from every rate.
    Excluded,
}

impl std::str::FromStr for AbstainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_error" | "as-error" => Ok(Self::AsError),
            "excluded" => Ok(Self::Excluded),
            other => Err(Error::invalid(format!("unknown abstain mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`, clean/offensive/hate order.
    pub counts: [[usize; 3]; 3],
    /// Abstentions per true class.
    pub abstained: [usize; 3],
    pub mode: AbstainMode,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[usize; 3]; 3]) -> Self {
        Self {
            counts,
            abstained: [0; 3],
            mode: AbstainMode::AsError,
        }
    }

    pub fn abstention_count(&self) -> usize {
        self.abstained.iter().sum()
    }

    pub fn trace(&self) -> usize {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    fn decided(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Rows used as rate denominators.
    pub fn row_total(&self, c: usize) -> usize {
        let row: usize = self.counts[c].iter().sum();
        match self.mode {
            AbstainMode::AsError => row + self.abstained[c],
            AbstainMode::Excluded => row,
        }
    }

    pub fn col_total(&self, c: usize) -> usize {
        (0..3).map(|r| self.counts[r][c]).sum()
    }

    pub fn total(&self) -> usize {
        match self.mode {
            AbstainMode::AsError => self.decided() + self.abstention_count(),
            AbstainMode::Excluded => self.decided(),
        }
    }
}

pub fn confusion(
    preds: &[Option<SeverityLabel>],
    truth: &[SeverityLabel],
    mode: AbstainMode,
) -> Result<ConfusionMatrix> {
    if preds.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: preds.len(),
        });
    }
    let mut cm = ConfusionMatrix {
        counts: [[0; 3]; 3],
        abstained: [0; 3],
        mode,
    };
    for (p, t) in preds.iter().zip(truth) {
        match p {
            Some(p) => cm.counts[t.index()][p.index()] += 1,
            None => cm.abstained[t.index()] += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalErrors {
    pub clean_as_hate_rate: f64,
    pub hate_as_clean_rate: f64,
    /// Adjacent-class errors over all errors.
    pub minor_error_rate: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn ordinal_errors(cm: &ConfusionMatrix) -> OrdinalErrors {
    let c = &cm.counts;
    let major = c[0][2] + c[2][0];
    let minor = c[0][1] + c[1][0] + c[1][2] + c[2][1];
    OrdinalErrors {
        clean_as_hate_rate: ratio(c[0][2], cm.row_total(0)),
        hate_as_clean_rate: ratio(c[2][0], cm.row_total(2)),
        minor_error_rate: ratio(minor, major + minor),
    }
}

/// Half-width of the 95% normal-approximation interval for an accuracy.
pub fn accuracy_half_width(accuracy: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.959_963_984_540_054 * (accuracy * (1.0 - accuracy) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub abstentions: usize,
    pub abstain_mode: AbstainMode,
    pub accuracy: f64,
    pub accuracy_half_width: f64,
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f1: [f64; 3],
    pub macro_f1: f64,
    pub auc: [Option<f64>; 3],
    pub ordinal: OrdinalErrors,
    pub confusion: ConfusionMatrix,
    /// Rates that hit a zero denominator or could not be computed.
    pub flags: Vec<String>,
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn class_metrics(cm: &ConfusionMatrix) -> EvalReport {
    let mut flags = Vec::new();
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    let mut f = [0.0; 3];
    for c in 0..3 {
        let name = SeverityLabel::ALL[c].as_str();
        let col = cm.col_total(c);
        let row = cm.row_total(c);
        if col == 0 {
            flags.push(format!("precision[{name}]: no predictions"));
        }
        if row == 0 {
            flags.push(format!("recall[{name}]: no true instances"));
        }
        precision[c] = ratio(cm.counts[c][c], col);
        recall[c] = ratio(cm.counts[c][c], row);
        f[c] = f1(precision[c], recall[c]);
    }
    let n = cm.total();
    let accuracy = ratio(cm.trace(), n);
    EvalReport {
        n,
        abstentions: cm.abstention_count(),
        abstain_mode: cm.mode,
        accuracy,
        accuracy_half_width: accuracy_half_width(accuracy, n),
        precision,
        recall,
        f1: f,
        macro_f1: f.iter().sum::<f64>() / 3.0,
        auc: [None; 3],
        ordinal: ordinal_errors(cm),
        confusion: cm.clone(),
        flags,
    }
}

/// One-vs-rest AUC per class from the Mann-Whitney statistic with midranks.
pub fn roc_auc_ovr(probs: &[[f64; 3]], truth: &[SeverityLabel]) -> Result<[Option<f64>; 3]> {
    if probs.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: probs.len(),
        });
    }
    let mut out = [None; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let pos: Vec<bool> = truth.iter().map(|t| t.index() == c).collect();
        *slot = binary_auc(&scores, &pos);
    }
    Ok(out)
}

/// `None` when either class is absent.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += (i..=j).filter(|&k| positive[order[k]]).count() as f64 * midrank;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Confusion, class metrics and AUC for a list of distributions.
pub fn evaluate(dists: &[SeverityDistribution], truth: &[SeverityLabel], mode: AbstainMode) -> Result<EvalReport> {
    let preds: Vec<Option<SeverityLabel>> = dists.iter().map(|d| d.decision()).collect();
    let cm = confusion(&preds, truth, mode)?;
    let mut report = class_metrics(&cm);
    let probs: Vec<[f64; 3]> = dists.iter().map(|d| d.probs()).collect();
    report.auc = roc_auc_ovr(&probs, truth)?;
    for (c, a) in report.auc.iter().enumerate() {
        if a.is_none() {
            report
                .flags
                .push(format!("auc[{}]: class absent from truth", SeverityLabel::ALL[c].as_str()));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SeverityLabel::*;

    fn labels_from(v: &[usize]) -> Vec<SeverityLabel> {
        v.iter().map(|&i| SeverityLabel::from_index(i).unwrap()).collect()
    }

    #[test]
    fn tallies() {
        let truth = labels_from(&[0; 10].iter().chain(&[1; 10]).chain(&[2; 10]).copied().collect::<Vec<_>>());
        let preds: Vec<_> = truth.iter().map(|t| Some(*t)).collect();
        let cm = confusion(&preds, &truth, AbstainMode::AsError).unwrap();
        assert_eq!(cm.counts, [[10, 0, 0], [0, 10, 0], [0, 0, 10]]);
        let r = class_metrics(&cm);
        assert_eq!(r.accuracy, 1.0);
        assert!(r.precision.iter().chain(&r.recall).chain(&r.f1).all(|v| *v == 1.0));

        let cm = confusion(&[Some(Hate)], &[Clean], AbstainMode::AsError).unwrap();
        assert_eq!(cm.counts[0][2], 1);
        assert!(confusion(&[None], &[Clean, Hate], AbstainMode::AsError).is_err());
    }

    #[test]
    fn abstention_modes() {
        let truth = labels_from(&[0, 0, 0, 0, 1, 1, 1, 2, 2, 2]);
        let mut preds: Vec<_> = truth.iter().map(|t| Some(*t)).collect();
        preds[0] = None;
        preds[4] = None;
        let cm = confusion(&preds, &truth, AbstainMode::AsError).unwrap();
        let r = class_metrics(&cm);
        assert_eq!(r.n, 10);
        assert_eq!(r.abstentions, 2);
        assert!((r.accuracy - 0.8).abs() < 1e-15);
        assert!((r.recall[0] - 0.75).abs() < 1e-15);
        let cm = confusion(&preds, &truth, AbstainMode::Excluded).unwrap();
        let r = class_metrics(&cm);
        assert_eq!(r.n, 8);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.accuracy, cm.trace() as f64 / cm.total() as f64);
    }

    #[test]
    fn hand_worked_matrix() {
        let r = class_metrics(&ConfusionMatrix::from_counts([[8, 1, 1], [2, 6, 2], [1, 1, 8]]));
        assert!((r.accuracy - 22.0 / 30.0).abs() < 1e-15);
        assert!((r.precision[2] - 8.0 / 11.0).abs() < 1e-15);
        assert!((r.recall[2] - 0.8).abs() < 1e-15);
        let p = 8.0 / 11.0;
        assert!((r.f1[2] - 2.0 * p * 0.8 / (p + 0.8)).abs() < 1e-15);
    }

    #[test]
    fn empty_column_flagged() {
        let r = class_metrics(&ConfusionMatrix::from_counts([[5, 0, 0], [3, 0, 0], [0, 0, 2]]));
        assert_eq!(r.precision[1], 0.0);
        assert!(r.flags.iter().any(|f| f.starts_with("precision[offensive]")));
    }

    #[test]
    fn ordinal_error_rates() {
        let e = ordinal_errors(&ConfusionMatrix::from_counts([[90, 8, 2], [5, 20, 5], [3, 4, 13]]));
        assert!((e.clean_as_hate_rate - 0.02).abs() < 1e-15);
        assert!((e.hate_as_clean_rate - 0.15).abs() < 1e-15);
        assert!((e.minor_error_rate - 22.0 / 27.0).abs() < 1e-15);
        let e = ordinal_errors(&ConfusionMatrix::from_counts([[3, 0, 0], [0, 3, 0], [0, 0, 3]]));
        assert_eq!((e.clean_as_hate_rate, e.hate_as_clean_rate, e.minor_error_rate), (0.0, 0.0, 0.0));
        let e = ordinal_errors(&ConfusionMatrix::from_counts([[3, 1, 0], [2, 3, 1], [0, 4, 3]]));
        assert_eq!(e.minor_error_rate, 1.0);
    }

    fn brute_auc(scores: &[f64], pos: &[bool]) -> Option<f64> {
        let mut num = 0.0;
        let mut pairs = 0usize;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        (pairs > 0).then(|| num / pairs as f64)
    }

    #[test]
    fn auc_examples() {
        assert_eq!(binary_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]), Some(1.0));
        assert_eq!(binary_auc(&[0.5; 6], &[true, false, true, false, true, false]), Some(0.5));
        assert_eq!(binary_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]), Some(0.75));
        assert_eq!(binary_auc(&[0.1, 0.2], &[true, true]), None);
        let auc = roc_auc_ovr(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], &[Clean, Offensive]).unwrap();
        assert_eq!(auc, [Some(1.0), Some(1.0), None]);
    }

    proptest! {
        #[test]
        fn auc_matches_pair_counting(
            rows in prop::collection::vec((0u8..6, any::<bool>()), 1..50)
        ) {
            let scores: Vec<f64> = rows.iter().map(|r| r.0 as f64 / 5.0).collect();
            let pos: Vec<bool> = rows.iter().map(|r| r.1).collect();
            prop_assert_eq!(binary_auc(&scores, &pos), brute_auc(&scores, &pos));
        }

        #[test]
        fn metrics_match_raw_tally(
            pairs in prop::collection::vec((0usize..3, 0usize..4), 1..120),
            excluded in any::<bool>()
        ) {
            let truth = labels_from(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let preds: Vec<Option<SeverityLabel>> = pairs.iter().map(|p| SeverityLabel::from_index(p.1)).collect();
            let mode = if excluded { AbstainMode::Excluded } else { AbstainMode::AsError };
            let r = class_metrics(&confusion(&preds, &truth, mode).unwrap());
            let counted: Vec<&(usize, usize)> = pairs.iter().filter(|p| !excluded || p.1 < 3).collect();
            let hits = counted.iter().filter(|p| p.0 == p.1).count();
            let acc = if counted.is_empty() { 0.0 } else { hits as f64 / counted.len() as f64 };
            prop_assert_eq!(r.accuracy, acc);
            for c in 0..3 {
                let tp = pairs.iter().filter(|p| p.0 == c && p.1 == c).count();
                let predicted = pairs.iter().filter(|p| p.1 == c).count();
                let actual = counted.iter().filter(|p| p.0 == c).count();
                let prec = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
                let rec = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
                prop_assert_eq!(r.precision[c], prec);
                prop_assert_eq!(r.recall[c], rec);
                prop_assert!((0.0..=1.0).contains(&r.f1[c]));
            }
        }
    }
}
