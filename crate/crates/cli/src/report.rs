//! CSV renderings of reports.

use std::fmt::Write;

use lachesis_core::experiment::{BaselineReport, BugScore, MethodMetrics, MetricsReport};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per fold, then the fold mean and the pooled predictions.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("method,fold,accuracy,roc_auc,precision,recall,selected_epoch\n");
    for f in &report.folds {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            report.method,
            f.fold,
            f.accuracy,
            opt(f.roc_auc),
            f.precision,
            f.recall,
            f.selected_epoch
        );
    }
    for (name, s) in [("mean", &report.mean), ("pooled", &report.pooled)] {
        let _ = writeln!(
            out,
            "{},{name},{},{},{},{},",
            report.method,
            s.accuracy,
            opt(s.roc_auc),
            s.precision,
            s.recall
        );
    }
    out
}

pub fn roc_csv(report: &MetricsReport) -> String {
    let mut out = String::from("fold,fpr,tpr,threshold\n");
    for f in &report.folds {
        for p in &f.roc_points {
            let _ = writeln!(out, "{},{},{},{}", f.fold, p.fpr, p.tpr, opt(p.threshold));
        }
    }
    for p in &report.mean_roc {
        let _ = writeln!(out, "mean,{},{},", p.fpr, p.tpr);
    }
    out
}

fn method_row(out: &mut String, m: &MethodMetrics) {
    let _ = writeln!(
        out,
        "{},{},{},{},{}",
        m.method,
        m.accuracy,
        opt(m.roc_auc),
        m.precision,
        m.recall
    );
}

pub fn baseline_csv(report: &BaselineReport) -> String {
    let mut out = String::from("method,accuracy,roc_auc,precision,recall\n");
    method_row(&mut out, &report.confidence);
    method_row(&mut out, &report.all_positive);
    out
}

pub fn baseline_table(report: &BaselineReport) -> String {
    let mut out = format!(
        "{} bugs, {} correct, threshold {}\n{:<14} {:>8} {:>8} {:>9} {:>8}\n",
        report.bugs, report.positives, report.threshold, "method", "accuracy", "roc_auc", "precision", "recall"
    );
    for m in [&report.confidence, &report.all_positive] {
        let auc = m.roc_auc.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(
            out,
            "{:<14} {:>8.4} {:>8} {:>9.4} {:>8.4}",
            m.method, m.accuracy, auc, m.precision, m.recall
        );
    }
    out
}

pub fn scores_csv(scores: &[BugScore]) -> String {
    let mut out = String::from("bug_id,score,predicted,label\n");
    for s in scores {
        let _ = writeln!(out, "{},{},{},{}", s.bug_id, s.score, s.predicted, s.label);
    }
    out
}
