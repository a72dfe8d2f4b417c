//! Binary classification metrics.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// 0 when there are no positive labels.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub confusion: Confusion,
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Thresholded metrics; a score predicts positive when `score >= threshold`.
pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Classification> {
    check_lengths(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(Classification {
        accuracy: c.accuracy(),
        precision: c.precision(),
        recall: c.recall(),
        confusion: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Predictions use `score >= threshold`. `None` on the origin point
    /// (nothing predicted positive) and on averaged curves.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub auc: f64,
    pub points: Vec<RocPoint>,
}

/// ROC-AUC in Mann-Whitney form (ties count one half), plus one ROC point
/// per distinct score.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    check_lengths(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // Walk from the highest score down, one tie group at a time. Every
    // negative in a group beats the positives already seen above it and
    // ties with the positives in the group.
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    // doubled to keep the half credits integral
    let mut twice_wins: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut group_pos, mut group_neg) = (0usize, 0usize);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            i += 1;
        }
        twice_wins += group_neg as u128 * (2 * tp as u128 + group_pos as u128);
        tp += group_pos;
        fp += group_neg;
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold: Some(s),
        });
    }
    let auc = twice_wins as f64 / (2.0 * positives as f64 * negatives as f64);
    Ok(Roc { auc, points })
}

/// Vertical average of several ROC curves on an even FPR grid, with linear
/// interpolation between each curve's points.
pub fn mean_roc(curves: &[&[RocPoint]], grid: usize) -> Vec<RocPoint> {
    if curves.is_empty() || grid < 2 {
        return Vec::new();
    }
    (0..grid)
        .map(|g| {
            let fpr = g as f64 / (grid - 1) as f64;
            let tpr = curves.iter().map(|c| interpolate(c, fpr)).sum::<f64>() / curves.len() as f64;
            RocPoint {
                fpr,
                tpr,
                threshold: None,
            }
        })
        .collect()
}

fn interpolate(curve: &[RocPoint], fpr: f64) -> f64 {
    let mut best = 0.0f64;
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        if fpr >= a.fpr && fpr <= b.fpr {
            let t = if b.fpr > a.fpr {
                (fpr - a.fpr) / (b.fpr - a.fpr)
            } else {
                1.0
            };
            best = best.max(a.tpr + t * (b.tpr - a.tpr));
        }
    }
    best
}
