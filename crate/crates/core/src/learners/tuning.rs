//! Grid search over boosted-tree settings scored by inner-fold F1.

use ndarray::{ArrayView2, Axis};

use super::gbt::{fit_gbt, GbtParams};
use crate::corpus::stratified_kfold_indices;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GbtGrid {
    pub max_depth: Vec<usize>,
    pub n_trees: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub base: GbtParams,
}

impl Default for GbtGrid {
    fn default() -> Self {
        Self {
            max_depth: vec![2, 3, 4],
            n_trees: vec![50, 100, 200],
            learning_rate: vec![0.05, 0.1, 0.3],
            base: GbtParams::default(),
        }
    }
}

impl GbtGrid {
    pub fn candidates(&self) -> Vec<GbtParams> {
        let mut out = Vec::new();
        for &max_depth in &self.max_depth {
            for &n_trees in &self.n_trees {
                for &learning_rate in &self.learning_rate {
                    out.push(GbtParams {
                        max_depth,
                        n_trees,
                        learning_rate,
                        ..self.base
                    });
                }
            }
        }
        out
    }
}

/// F1 of the positive class at a 0.5 threshold.
pub fn positive_f1(truth: &[bool], prob: &[f64]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for (&t, &p) in truth.iter().zip(prob) {
        match (t, p > 0.5) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fneg += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fneg)
    }
}

/// Returns the grid point with the best mean inner-fold F1 (first in grid
/// order on ties) and that score.
pub fn grid_search_gbt(
    x: ArrayView2<f64>,
    y: &[bool],
    grid: &GbtGrid,
    folds: usize,
    seed: u64,
) -> Result<(GbtParams, f64)> {
    let labels: Vec<usize> = y.iter().map(|&b| b as usize).collect();
    let folds = stratified_kfold_indices(&labels, 2, folds, seed)?;
    let mut best: Option<(GbtParams, f64)> = None;
    for cand in grid.candidates() {
        let mut total = 0.0;
        for f in &folds {
            let xt = x.select(Axis(0), &f.train);
            let yt: Vec<bool> = f.train.iter().map(|&i| y[i]).collect();
            let m = fit_gbt(xt.view(), &yt, &cand)?;
            let probs = f
                .validation
                .iter()
                .map(|&i| m.predict_prob(x.row(i)))
                .collect::<Result<Vec<_>>>()?;
            let truth: Vec<bool> = f.validation.iter().map(|&i| y[i]).collect();
            total += positive_f1(&truth, &probs);
        }
        let score = total / folds.len() as f64;
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((cand, score));
        }
    }
    best.ok_or_else(|| Error::invalid("empty GBT grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn f1_by_hand() {
        let truth = [true, true, false, false];
        let prob = [0.9, 0.2, 0.7, 0.1];
        // tp 1, fp 1, fn 1
        assert!((positive_f1(&truth, &prob) - 0.5).abs() < 1e-12);
        assert_eq!(positive_f1(&[false], &[0.1]), 0.0);
    }

    #[test]
    fn grid_has_27_points_and_search_runs() {
        assert_eq!(GbtGrid::default().candidates().len(), 27);
        let x = Array2::from_shape_fn((60, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let y: Vec<bool> = (0..60).map(|i| (i * 7) % 11 > 5).collect();
        let grid = GbtGrid {
            max_depth: vec![1, 2],
            n_trees: vec![5],
            learning_rate: vec![0.3],
            base: GbtParams { min_leaf: 2, ..Default::default() },
        };
        let (p, s) = grid_search_gbt(x.view(), &y, &grid, 3, 1).unwrap();
        assert!(grid.candidates().contains(&p));
        assert!((0.0..=1.0).contains(&s));
    }
}
