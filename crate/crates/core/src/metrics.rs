//! Support recovery, prediction quality and ROC curves along a path.

use serde::{Deserialize, Serialize};

use crate::data::Family;
use crate::error::{Error, Result};
use crate::linalg;

/// A folded-back coefficient counts as selected when its magnitude exceeds
/// this value; exact cancellation of duplicates is "not selected".
pub const SELECTION_THRESHOLD: f64 = 1e-12;

pub fn is_selected(b: f64) -> bool {
    b.abs() > SELECTION_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    /// Counts from selection flags and truth flags of equal length.
    pub fn from_flags(selected: &[bool], truth: &[bool]) -> Result<Self> {
        if selected.len() != truth.len() {
            return Err(Error::shape(format!(
                "{} estimates for {} truth entries",
                selected.len(),
                truth.len()
            )));
        }
        let mut c = Confusion::default();
        for (&s, &t) in selected.iter().zip(truth) {
            match (s, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `TP / (TP + FN)`; also the true positive rate.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `TP / (TP + FP)`; undefined when nothing is selected.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `FP / (FP + TN)`
    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    /// `FP / (TP + FP)`
    pub fn fdr(&self) -> Option<f64> {
        ratio(self.fp, self.tp + self.fp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub features: Confusion,
    /// Counts over group names, when both selected and true groups are known.
    pub groups: Option<Confusion>,
}

impl SupportReport {
    pub fn recall(&self) -> Option<f64> {
        self.features.recall()
    }

    pub fn precision(&self) -> Option<f64> {
        self.features.precision()
    }
}

fn support_flags(p: usize, support: &[usize]) -> Result<Vec<bool>> {
    let mut truth = vec![false; p];
    for &j in support {
        *truth
            .get_mut(j)
            .ok_or_else(|| Error::shape(format!("support index {} beyond p = {p}", j + 1)))? = true;
    }
    Ok(truth)
}

/// Feature-level counts of `beta_hat` against the true support.
pub fn support_metrics(beta_hat: &[f64], support: &[usize]) -> Result<SupportReport> {
    let truth = support_flags(beta_hat.len(), support)?;
    let selected: Vec<bool> = beta_hat.iter().map(|&b| is_selected(b)).collect();
    Ok(SupportReport {
        features: Confusion::from_flags(&selected, &truth)?,
        groups: None,
    })
}

/// Group-level counts over `all` group names.
pub fn group_metrics(selected: &[String], truth: &[String], all: &[String]) -> Confusion {
    let s: Vec<bool> = all.iter().map(|g| selected.contains(g)).collect();
    let t: Vec<bool> = all.iter().map(|g| truth.contains(g)).collect();
    Confusion::from_flags(&s, &t).expect("aligned by construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    /// Pearson correlation of predictions and observations (gaussian).
    pub correlation: Option<f64>,
    /// Fraction classified correctly at probability 0.5 (binomial).
    pub accuracy: Option<f64>,
}

/// `y_hat` holds predicted values (gaussian) or probabilities (binomial).
pub fn prediction_metrics(y_hat: &[f64], y: &[f64], family: Family) -> Result<PredictionReport> {
    if y_hat.len() != y.len() {
        return Err(Error::shape("predictions and observations differ in length"));
    }
    Ok(match family {
        Family::Gaussian => PredictionReport {
            correlation: linalg::pearson(y_hat, y),
            accuracy: None,
        },
        Family::Binomial => PredictionReport {
            correlation: None,
            accuracy: (!y.is_empty()).then(|| {
                let hits = y_hat
                    .iter()
                    .zip(y)
                    .filter(|(&p, &t)| (p > 0.5) == (t == 1.0))
                    .count();
                hits as f64 / y.len() as f64
            }),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub lambda: f64,
    pub fpr: f64,
    pub tpr: f64,
    /// `None` when nothing is selected.
    pub fdr: Option<f64>,
}

/// One ROC point per path entry, in path order (largest `lambda` first).
pub fn roc_along_path(lambdas: &[f64], betas: &[Vec<f64>], support: &[usize]) -> Result<Vec<RocPoint>> {
    if lambdas.len() != betas.len() {
        return Err(Error::shape("one coefficient vector per lambda is required"));
    }
    betas
        .iter()
        .zip(lambdas)
        .map(|(b, &lambda)| {
            let c = support_metrics(b, support)?.features;
            Ok(RocPoint {
                lambda,
                fpr: c.fpr().unwrap_or(0.0),
                tpr: c.recall().unwrap_or(0.0),
                fdr: c.fdr(),
            })
        })
        .collect()
}

/// Piecewise-linear curve through `(fpr, tpr)` with the largest TPR kept at
/// repeated FPR values.
fn curve(points: &[RocPoint]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|next, kept| next.0 == kept.0);
    pts
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let (first, last) = (curve.first()?, curve.last()?);
    if x < first.0 || x > last.0 {
        return None;
    }
    let k = curve.partition_point(|p| p.0 < x);
    if curve[k].0 == x {
        return Some(curve[k].1);
    }
    let (x0, y0) = curve[k - 1];
    let (x1, y1) = curve[k];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Fraction of `b`'s points, restricted to FPR values covered by `a`, at
/// which the interpolated curve of `a` is at least `b`'s TPR (minus `eps`).
/// `None` when no point of `b` falls in `a`'s FPR range.
pub fn dominance_fraction(a: &[RocPoint], b: &[RocPoint], eps: f64) -> Option<f64> {
    let ca = curve(a);
    let mut matched = 0usize;
    let mut above = 0usize;
    for p in b {
        if let Some(ta) = interpolate(&ca, p.fpr) {
            matched += 1;
            if ta >= p.tpr - eps {
                above += 1;
            }
        }
    }
    (matched > 0).then(|| above as f64 / matched as f64)
}
