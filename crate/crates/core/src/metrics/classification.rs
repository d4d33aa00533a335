use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Per-class one-vs-rest confusion counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
    pub tn: Vec<usize>,
}

impl ConfusionCounts {
    pub fn from_labels(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Self> {
        check_lengths(pred, truth)?;
        let mut c = ConfusionCounts {
            tp: vec![0; n_classes],
            fp: vec![0; n_classes],
            fn_: vec![0; n_classes],
            tn: vec![0; n_classes],
        };
        for (&p, &t) in pred.iter().zip(truth) {
            if p >= n_classes || t >= n_classes {
                return Err(invalid(format!("label outside 0..{n_classes}")));
            }
            if p == t {
                c.tp[p] += 1;
            } else {
                c.fp[p] += 1;
                c.fn_[t] += 1;
            }
        }
        let n = pred.len();
        for k in 0..n_classes {
            c.tn[k] = n - c.tp[k] - c.fp[k] - c.fn_[k];
        }
        Ok(c)
    }

    pub fn precision(&self, class: usize) -> f64 {
        ratio(self.tp[class], self.tp[class] + self.fp[class])
    }

    pub fn recall(&self, class: usize) -> f64 {
        ratio(self.tp[class], self.tp[class] + self.fn_[class])
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self, class: usize) -> f64 {
        let (p, r) = (self.precision(class), self.recall(class));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Number of true members of `class`.
    pub fn support(&self, class: usize) -> usize {
        self.tp[class] + self.fn_[class]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    /// F1 of one class against the rest.
    Binary { positive: usize },
    /// Unweighted mean over classes present in truth or prediction.
    Macro,
    /// Support-weighted mean over classes present in truth.
    Weighted,
}

pub fn f1(pred: &[usize], truth: &[usize], mode: F1Mode) -> Result<f64> {
    check_lengths(pred, truth)?;
    let k = pred.iter().chain(truth).max().map_or(0, |m| m + 1);
    let k = match mode {
        F1Mode::Binary { positive } => k.max(positive + 1),
        _ => k,
    };
    let cc = ConfusionCounts::from_labels(pred, truth, k)?;
    Ok(match mode {
        F1Mode::Binary { positive } => cc.f1(positive),
        F1Mode::Macro => {
            let present: Vec<usize> = (0..k)
                .filter(|&c| cc.support(c) > 0 || cc.tp[c] + cc.fp[c] > 0)
                .collect();
            present.iter().map(|&c| cc.f1(c)).sum::<f64>() / present.len() as f64
        }
        F1Mode::Weighted => {
            let n = truth.len() as f64;
            (0..k).map(|c| cc.f1(c) * cc.support(c) as f64 / n).sum()
        }
    })
}

/// Majority-class count over minority-class count, over present classes.
pub fn imbalance_ratio(labels: &[usize]) -> Result<f64> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&c| counts[c] += 1);
    let present: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    if present.len() < 2 {
        return Err(Error::SingleClass(present.len()));
    }
    let max = *present.iter().max().unwrap_or(&1);
    let min = *present.iter().min().unwrap_or(&1);
    Ok(max as f64 / min as f64)
}
