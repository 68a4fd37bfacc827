//! Metrics, ordinal error analysis, cross-platform grids and coder agreement.

pub mod agreement;
pub mod grid;
pub mod metrics;

pub use agreement::{agreement, cohen_kappa, krippendorff_alpha, AgreementReport, Distance};
pub use grid::{cross_platform_grid, grid_cell, CrossPlatformGrid, GridCell};
pub use metrics::{
    accuracy_half_width, binary_auc, class_metrics, confusion, evaluate, ordinal_errors, roc_auc_ovr, AbstainMode,
    ConfusionMatrix, EvalReport, OrdinalErrors,
};

/// Fixed-order text table: one row per class, then accuracy and macro-F1.
pub fn render_table(r: &EvalReport) -> String {
    let mut s = String::from("class       precision  recall     f1         auc\n");
    for (c, label) in crate::corpus::SeverityLabel::ALL.iter().enumerate() {
        let auc = r.auc[c].map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
        s.push_str(&format!(
            "{:<11} {:<10.4} {:<10.4} {:<10.4} {auc}\n",
            label.as_str(),
            r.precision[c],
            r.recall[c],
            r.f1[c]
        ));
    }
    s.push_str(&format!(
        "accuracy    {:.4} ± {:.4} (n={}, abstained={})\nmacro_f1    {:.4}\n",
        r.accuracy, r.accuracy_half_width, r.n, r.abstentions, r.macro_f1
    ));
    s
}

pub fn render_grid(g: &CrossPlatformGrid) -> String {
    let mut s = format!("{:<12}", "model\\data");
    for d in &g.datasets {
        s.push_str(&format!(" {d:<26}"));
    }
    s.push('\n');
    for (i, m) in g.models.iter().enumerate() {
        s.push_str(&format!("{m:<12}"));
        for c in &g.cells[i] {
            let cell = format!("{:.3}/{:.3}/{:.3}", c.accuracy, c.hate_precision, c.hate_recall);
            s.push_str(&format!(" {cell:<26}"));
        }
        s.push('\n');
    }
    s.push_str("cells: accuracy/hate precision/hate recall\n");
    s
}
