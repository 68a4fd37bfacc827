//! Model-by-platform evaluation grids.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{class_metrics, confusion, AbstainMode};
use crate::corpus::SeverityLabel;
use crate::error::{Error, Result};
use crate::stack::{MessageInput, PlatformModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub accuracy: f64,
    pub hate_precision: f64,
    pub hate_recall: f64,
    pub hate_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossPlatformGrid {
    /// Row labels.
    pub models: Vec<String>,
    /// Column labels.
    pub datasets: Vec<String>,
    /// `cells[i][j]`: model i on dataset j.
    pub cells: Vec<Vec<GridCell>>,
}

impl CrossPlatformGrid {
    pub fn cell(&self, model: &str, dataset: &str) -> Option<&GridCell> {
        let i = self.models.iter().position(|m| m == model)?;
        let j = self.datasets.iter().position(|d| d == dataset)?;
        Some(&self.cells[i][j])
    }
}

/// Scores labelled predictions with the hate-class columns used by the grid.
pub fn grid_cell(preds: &[Option<SeverityLabel>], truth: &[SeverityLabel], mode: AbstainMode) -> Result<GridCell> {
    if truth.is_empty() {
        return Err(Error::invalid("grid cell over an empty test set"));
    }
    let r = class_metrics(&confusion(preds, truth, mode)?);
    let h = SeverityLabel::Hate.index();
    Ok(GridCell {
        accuracy: r.accuracy,
        hate_precision: r.precision[h],
        hate_recall: r.recall[h],
        hate_f1: r.f1[h],
    })
}

pub fn cross_platform_grid(
    models: &[&PlatformModel],
    tests: &BTreeMap<String, Vec<MessageInput>>,
    mode: AbstainMode,
) -> Result<CrossPlatformGrid> {
    let datasets: Vec<String> = tests.keys().cloned().collect();
    for (name, rows) in tests {
        if rows.is_empty() {
            return Err(Error::invalid(format!("test set `{name}` is empty")));
        }
        if let Some(m) = rows.iter().find(|m| m.platform != *name) {
            return Err(Error::invalid(format!("message `{}` in test set `{name}` is tagged `{}`", m.id, m.platform)));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|i| (0..datasets.len()).map(move |j| (i, j)))
        .collect();
    let scored: Vec<GridCell> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let rows = &tests[&datasets[j]];
            let truth: Vec<SeverityLabel> = rows
                .iter()
                .map(|m| m.label.ok_or_else(|| Error::invalid(format!("test message `{}` is unlabelled", m.id))))
                .collect::<Result<_>>()?;
            let preds: Vec<Option<SeverityLabel>> = rows
                .iter()
                .map(|m| models[i].predict(m).map(|d| d.decision()))
                .collect::<Result<_>>()?;
            grid_cell(&preds, &truth, mode)
        })
        .collect::<Result<_>>()?;
    let cells = scored.chunks(datasets.len().max(1)).map(<[GridCell]>::to_vec).collect();
    Ok(CrossPlatformGrid {
        models: models.iter().map(|m| m.platform.clone()).collect(),
        datasets,
        cells,
    })
}
