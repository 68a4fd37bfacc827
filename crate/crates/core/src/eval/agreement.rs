//! Two-coder agreement: raw percentage, Cohen's kappa and Krippendorff's
//! alpha from the coincidence matrix.

use serde::{Deserialize, Serialize};

use crate::corpus::SeverityLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n: usize,
    pub percent_agreement: f64,
    pub cohen_kappa: f64,
    pub krippendorff_alpha_ordinal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    Nominal,
    Ordinal,
}

fn check(a: &[usize], b: &[usize], k: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("agreement needs at least one coded item"));
    }
    if let Some(v) = a.iter().chain(b).find(|&&v| v >= k) {
        return Err(Error::invalid(format!("category {v} outside 0..{k}")));
    }
    Ok(())
}

pub fn percent_agreement(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

pub fn cohen_kappa(a: &[usize], b: &[usize], k: usize) -> Result<f64> {
    check(a, b, k)?;
    let n = a.len() as f64;
    let mut ma = vec![0.0; k];
    let mut mb = vec![0.0; k];
    for (&x, &y) in a.iter().zip(b) {
        ma[x] += 1.0;
        mb[y] += 1.0;
    }
    let po = percent_agreement(a, b);
    let pe: f64 = ma.iter().zip(&mb).map(|(x, y)| x * y / (n * n)).sum();
    if pe >= 1.0 {
        // Both coders used a single, identical category throughout.
        return Ok(1.0);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// `o[c][k]`: each item with values (x, y) adds one to `o[x][y]` and one to `o[y][x]`.
pub fn coincidence_matrix(a: &[usize], b: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut o = vec![vec![0.0; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        o[x][y] += 1.0;
        o[y][x] += 1.0;
    }
    o
}

fn squared_distance(metric: Distance, marginals: &[f64], c: usize, k: usize) -> f64 {
    match metric {
        Distance::Nominal => f64::from(u8::from(c != k)),
        Distance::Ordinal => {
            let (lo, hi) = (c.min(k), c.max(k));
            let span: f64 = marginals[lo..=hi].iter().sum();
            let d = span - (marginals[lo] + marginals[hi]) / 2.0;
            d * d
        }
    }
}

pub fn krippendorff_alpha(a: &[usize], b: &[usize], k: usize, metric: Distance) -> Result<f64> {
    check(a, b, k)?;
    let o = coincidence_matrix(a, b, k);
    let marg: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = marg.iter().sum();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for j in 0..k {
            let d2 = squared_distance(metric, &marg, c, j);
            observed += o[c][j] * d2;
            expected += marg[c] * marg[j] * d2;
        }
    }
    if expected == 0.0 {
        return Ok(if observed == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

pub fn agreement(a: &[SeverityLabel], b: &[SeverityLabel]) -> Result<AgreementReport> {
    let a: Vec<usize> = a.iter().map(|l| l.index()).collect();
    let b: Vec<usize> = b.iter().map(|l| l.index()).collect();
    Ok(AgreementReport {
        n: a.len(),
        cohen_kappa: cohen_kappa(&a, &b, 3)?,
        krippendorff_alpha_ordinal: krippendorff_alpha(&a, &b, 3, Distance::Ordinal)?,
        percent_agreement: percent_agreement(&a, &b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(t: &[[usize; 2]; 2]) -> (Vec<usize>, Vec<usize>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, row) in t.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                a.extend(std::iter::repeat_n(i, c));
                b.extend(std::iter::repeat_n(j, c));
            }
        }
        (a, b)
    }

    #[test]
    fn kappa_from_table() {
        let (a, b) = table(&[[20, 5], [5, 20]]);
        assert!((cohen_kappa(&a, &b, 2).unwrap() - 0.6).abs() < 1e-12);
        assert!((percent_agreement(&a, &b) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn perfect_agreement() {
        use SeverityLabel::*;
        let l = [Clean, Hate, Offensive, Clean, Hate];
        let r = agreement(&l, &l).unwrap();
        assert_eq!((r.percent_agreement, r.cohen_kappa, r.krippendorff_alpha_ordinal), (1.0, 1.0, 1.0));
        assert!(agreement(&[], &[]).is_err());
        assert!(agreement(&[Clean], &[Clean, Hate]).is_err());
    }

    #[test]
    fn ordinal_beats_nominal_when_disagreements_are_adjacent() {
        let a = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
        let b = [0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 1];
        let ord = krippendorff_alpha(&a, &b, 3, Distance::Ordinal).unwrap();
        let nom = krippendorff_alpha(&a, &b, 3, Distance::Nominal).unwrap();
        assert!(ord > nom, "{ord} vs {nom}");
        assert!((ord - oracle_alpha(&a, &b, 3, true)).abs() < 1e-12);
        assert!((nom - oracle_alpha(&a, &b, 3, false)).abs() < 1e-12);
    }

    /// Contingency-table kappa: (sum p_ii - sum p_i. p_.i) / (1 - sum p_i. p_.i).
    fn oracle_kappa(a: &[usize], b: &[usize], k: usize) -> f64 {
        let n = a.len() as f64;
        let mut t = vec![vec![0.0; k]; k];
        for (&x, &y) in a.iter().zip(b) {
            t[x][y] += 1.0 / n;
        }
        let po: f64 = (0..k).map(|i| t[i][i]).sum();
        let pe: f64 = (0..k)
            .map(|i| t[i].iter().sum::<f64>() * (0..k).map(|r| t[r][i]).sum::<f64>())
            .sum();
        if pe >= 1.0 {
            1.0
        } else {
            (po - pe) / (1.0 - pe)
        }
    }

    /// Pairable-value form: observed disagreement is the mean distance within
    /// units, expected disagreement the mean over all pairs of pooled values.
    fn oracle_alpha(a: &[usize], b: &[usize], k: usize, ordinal: bool) -> f64 {
        let values: Vec<usize> = a.iter().chain(b).copied().collect();
        let mut freq = vec![0.0; k];
        for &v in &values {
            freq[v] += 1.0;
        }
        let delta = |x: usize, y: usize| -> f64 {
            if !ordinal {
                return if x == y { 0.0 } else { 1.0 };
            }
            let (lo, hi) = (x.min(y), x.max(y));
            let mut s = 0.0;
            for g in lo..=hi {
                s += freq[g];
            }
            let d = s - (freq[lo] + freq[hi]) / 2.0;
            d * d
        };
        let d_o: f64 = a.iter().zip(b).map(|(&x, &y)| delta(x, y)).sum::<f64>() / a.len() as f64;
        let mut d_e = 0.0;
        let mut pairs = 0.0;
        for i in 0..values.len() {
            for j in 0..values.len() {
                if i != j {
                    d_e += delta(values[i], values[j]);
                    pairs += 1.0;
                }
            }
        }
        d_e /= pairs;
        if d_e == 0.0 {
            return if d_o == 0.0 { 1.0 } else { 0.0 };
        }
        1.0 - d_o / d_e
    }

    proptest! {
        #[test]
        fn kappa_and_alpha_match_oracles(
            k in 2usize..=5,
            raw in prop::collection::vec((0usize..5, 0usize..5), 2..60)
        ) {
            let a: Vec<usize> = raw.iter().map(|r| r.0 % k).collect();
            let b: Vec<usize> = raw.iter().map(|r| r.1 % k).collect();
            let kappa = cohen_kappa(&a, &b, k).unwrap();
            prop_assert!((kappa - oracle_kappa(&a, &b, k)).abs() <= 1e-12);
            prop_assert!(kappa <= 1.0 + 1e-12);
            for ordinal in [true, false] {
                let metric = if ordinal { Distance::Ordinal } else { Distance::Nominal };
                let alpha = krippendorff_alpha(&a, &b, k, metric).unwrap();
                prop_assert!((alpha - oracle_alpha(&a, &b, k, ordinal)).abs() <= 1e-12, "{} {}", alpha, ordinal);
                prop_assert!(alpha <= 1.0 + 1e-12);
            }
        }
    }
}
