//! Plain-text tables and CSV exports of training and evaluation results.

use std::fmt::Write as _;

use wqnet_core::data::WqiClass;
use wqnet_core::evaluation::{ClassMetrics, ClassificationReport, ConfusionMatrix, CvSummary, NestedCvReport, RegressionMetrics};
use wqnet_core::training::TrainHistory;

fn metric_row(out: &mut String, name: &str, m: &ClassMetrics) {
    let _ = writeln!(out, "{name:>14} {:>10.2} {:>10.2} {:>10.2} {:>10}", m.precision, m.recall, m.f1, m.support);
}

/// Per-class precision/recall/F1/support, accuracy and averages.
pub fn classification_table(report: &ClassificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>14} {:>10} {:>10} {:>10} {:>10}", "", "precision", "recall", "f1-score", "support");
    out.push('\n');
    for (code, m) in report.classes.iter().enumerate() {
        let name = match WqiClass::from_code(code as u8) {
            Some(c) => format!("{code} {}", c.label()),
            None => code.to_string(),
        };
        metric_row(&mut out, &name, m);
    }
    out.push('\n');
    let total = report.macro_avg.support;
    let _ = writeln!(out, "{:>14} {:>10} {:>10} {:>10.2} {:>10}", "accuracy", "", "", report.accuracy, total);
    metric_row(&mut out, "macro avg", &report.macro_avg);
    metric_row(&mut out, "weighted avg", &report.weighted_avg);
    out
}

/// Rows are actual classes, columns predicted.
pub fn confusion_table(cm: &ConfusionMatrix) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:>12}", "actual\\pred");
    for c in 0..cm.k {
        let _ = write!(out, " {c:>6}");
    }
    out.push('\n');
    for (a, row) in cm.counts.iter().enumerate() {
        let _ = write!(out, "{a:>12}");
        for v in row {
            let _ = write!(out, " {v:>6}");
        }
        out.push('\n');
    }
    out
}

pub fn regression_summary(m: &RegressionMetrics) -> String {
    format!("n     {}\nrmse  {:.4}\nr2    {:.4}\n", m.n, m.rmse, m.r2)
}

/// One row per fold, then `Mean ± SD`.
pub fn cv_table(summary: &CvSummary, score_name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>10}", "Fold", score_name);
    for (i, s) in summary.fold_scores.iter().enumerate() {
        let _ = writeln!(out, "{:<12} {:>10.4}", i + 1, s);
    }
    let _ = writeln!(out, "{:<12} {:>10}", "Mean ± SD", format!("{:.4} ± {:.4}", summary.mean, summary.sample_sd));
    out
}

pub fn cv_csv(summary: &CvSummary, score_name: &str) -> String {
    let mut out = format!("fold,{score_name}\n");
    for (i, s) in summary.fold_scores.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, s);
    }
    out
}

/// Chosen hyperparameters and outer-fold scores, then `Mean ± Std Dev`.
pub fn nested_table(report: &NestedCvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>6} {:>8} {:>8} {:>8} {:>8}", "Outer fold", "batch", "lr", "dropout", "R2", "RMSE");
    for (i, f) in report.folds.iter().enumerate() {
        let h = f.chosen;
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>8} {:>8} {:>8.4} {:>8.4}",
            i + 1,
            h.batch_size,
            h.learning_rate,
            h.dropout_rate,
            f.r2,
            f.rmse
        );
    }
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>8} {:>8} {:>8} {:>8}",
        "Mean ± Std Dev",
        "",
        "",
        "",
        format!("{:.2} ± {:.2}", report.r2.mean, report.r2.sample_sd),
        format!("{:.2} ± {:.2}", report.rmse.mean, report.rmse.sample_sd)
    );
    out
}

pub fn nested_csv(report: &NestedCvReport) -> String {
    let mut out = String::from("fold,batch_size,learning_rate,dropout_rate,r2,rmse\n");
    for (i, f) in report.folds.iter().enumerate() {
        let h = f.chosen;
        let _ = writeln!(out, "{},{},{},{},{},{}", i + 1, h.batch_size, h.learning_rate, h.dropout_rate, f.r2, f.rmse);
    }
    out
}

/// `epoch,train_loss,val_loss`, epochs from 1.
pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for (i, (t, v)) in history.train_loss.iter().zip(&history.validation_loss).enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, t, v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cv_table_shape() {
        let s = CvSummary::from_scores(vec![0.92, 0.94, 0.89, 0.88, 0.95, 0.91, 0.95, 0.87, 0.96, 0.92]).unwrap();
        let t = cv_table(&s, "Accuracy");
        assert_eq!(t.lines().count(), 12);
        assert!(t.lines().last().unwrap().contains("0.9190 ± 0.0314"));
        assert_eq!(cv_csv(&s, "accuracy").lines().count(), 11);
    }

    #[test]
    fn history_rows() {
        let h = TrainHistory { train_loss: vec![1.0, 0.5], validation_loss: vec![1.1, 0.6], best_epoch: 2, stopped_early: false };
        assert_eq!(history_csv(&h), "epoch,train_loss,val_loss\n1,1,1.1\n2,0.5,0.6\n");
    }
}
