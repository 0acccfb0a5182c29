//! Discrimination metrics: one-versus-rest AUC, argmax confusion metrics
//! and Youden operating points.
//!
//! Thresholded rules are "score >= threshold is positive" throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::PredictionSet;
use crate::error::{Error, Result};

/// One-versus-rest AUC with half credit for ties, via midranks.
pub fn ovr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimMismatch { expected: scores.len(), got: labels.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::undefined("AUC needs at least one positive and one negative case"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the rank sum of the positives, kept integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // midrank of positions i..=j (1-based) is (i + j + 2) / 2
        let twice_mid = (i + j + 2) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        i = j + 1;
    }
    let n_pos = n_pos as u128;
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg as u128) as f64)
}

/// Equal-weight mean of OvR AUCs over the classes present in the labels.
pub fn macro_auc(pred: &PredictionSet) -> Result<f64> {
    let classes = pred.n_classes().ok_or_else(|| Error::invalid("macro AUC needs a classification set"))?;
    let labels = pred.labels();
    let present: Vec<usize> = (0..classes).filter(|c| labels.contains(c)).collect();
    if present.len() < 2 {
        return Err(Error::undefined(format!("macro AUC needs two classes present, found {}", present.len())));
    }
    let mut sum = 0.0;
    for &c in &present {
        let is_c: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        sum += ovr_auc(&pred.class_scores(c), &is_c)?;
    }
    Ok(sum / present.len() as f64)
}

/// Lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate().skip(1) {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ClassCounts {
    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }
    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }
    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }
    pub fn npv(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fn_)
    }
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_class: Vec<ClassCounts>,
}

/// Macro average of one metric; classes with a zero denominator are left
/// out and counted in `undefined`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroValue {
    pub value: Option<f64>,
    pub undefined: usize,
}

impl MacroValue {
    fn from_parts(parts: impl Iterator<Item = Option<f64>>) -> Self {
        let mut sum = 0.0;
        let mut n = 0usize;
        let mut undefined = 0;
        for p in parts {
            match p {
                Some(v) => {
                    sum += v;
                    n += 1;
                }
                None => undefined += 1,
            }
        }
        Self { value: (n > 0).then(|| sum / n as f64), undefined }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub sensitivity: MacroValue,
    pub specificity: MacroValue,
    pub ppv: MacroValue,
    pub npv: MacroValue,
}

impl MacroMetrics {
    fn from_counts(counts: &[ClassCounts]) -> Self {
        Self {
            sensitivity: MacroValue::from_parts(counts.iter().map(ClassCounts::sensitivity)),
            specificity: MacroValue::from_parts(counts.iter().map(ClassCounts::specificity)),
            ppv: MacroValue::from_parts(counts.iter().map(ClassCounts::ppv)),
            npv: MacroValue::from_parts(counts.iter().map(ClassCounts::npv)),
        }
    }
}

pub fn confusion_at_argmax(pred: &PredictionSet) -> Result<(ConfusionCounts, MacroMetrics)> {
    let classes = pred.n_classes().ok_or_else(|| Error::invalid("confusion needs a classification set"))?;
    let labels = pred.labels();
    let predicted: Vec<usize> = pred.cases.iter().map(|c| argmax(&c.scores)).collect();
    let per_class: Vec<ClassCounts> = (0..classes)
        .map(|c| {
            let mut k = ClassCounts::default();
            for (&y, &yh) in labels.iter().zip(&predicted) {
                match (y == c, yh == c) {
                    (true, true) => k.tp += 1,
                    (false, true) => k.fp += 1,
                    (false, false) => k.tn += 1,
                    (true, false) => k.fn_ += 1,
                }
            }
            k
        })
        .collect();
    let macros = MacroMetrics::from_counts(&per_class);
    Ok((ConfusionCounts { per_class }, macros))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

impl OperatingPoint {
    pub fn counts_at(scores: &[f64], labels: &[bool], threshold: f64) -> ClassCounts {
        let mut k = ClassCounts::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (y, s >= threshold) {
                (true, true) => k.tp += 1,
                (false, true) => k.fp += 1,
                (false, false) => k.tn += 1,
                (true, false) => k.fn_ += 1,
            }
        }
        k
    }

    fn from_counts(threshold: f64, k: &ClassCounts) -> Self {
        Self { threshold, sensitivity: k.sensitivity(), specificity: k.specificity(), ppv: k.ppv(), npv: k.npv() }
    }

    pub fn youden_j(&self) -> Option<f64> {
        Some(self.sensitivity? + self.specificity? - 1.0)
    }
}

/// The observed score maximising sensitivity + specificity - 1; the
/// smallest such score on ties. J is compared in exact integer form
/// `tp * n_neg + tn * n_pos`.
pub fn youden_threshold(scores: &[f64], labels: &[bool]) -> Result<OperatingPoint> {
    if scores.len() != labels.len() {
        return Err(Error::DimMismatch { expected: scores.len(), got: labels.len() });
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::undefined("Youden threshold needs both classes"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sweep thresholds ascending: at the first index of each distinct score
    // everything from there up is called positive.
    let (mut pos_below, mut neg_below) = (0usize, 0usize);
    let mut best: Option<(u128, usize)> = None;
    let mut i = 0;
    while i < order.len() {
        let tp = n_pos - pos_below;
        let tn = neg_below;
        let j_scaled = tp as u128 * n_neg as u128 + tn as u128 * n_pos as u128;
        if best.is_none_or(|(b, _)| j_scaled > b) {
            best = Some((j_scaled, i));
        }
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
    }
    let (_, at) = best.expect("non-empty");
    let t = scores[order[at]];
    Ok(OperatingPoint::from_counts(t, &OperatingPoint::counts_at(scores, labels, t)))
}

/// One-versus-rest Youden operating point for every class that has both
/// positives and negatives.
pub fn per_class_youden(pred: &PredictionSet) -> Result<BTreeMap<usize, OperatingPoint>> {
    let classes = pred.n_classes().ok_or_else(|| Error::invalid("Youden needs a classification set"))?;
    let labels = pred.labels();
    let mut out = BTreeMap::new();
    for c in 0..classes {
        let is_c: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        match youden_threshold(&pred.class_scores(c), &is_c) {
            Ok(op) => {
                out.insert(c, op);
            }
            Err(e) if e.is_undefined_metric() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Macro sensitivity/specificity/PPV/NPV at class-specific Youden points.
pub fn macro_at_youden(pred: &PredictionSet) -> Result<MacroMetrics> {
    let labels = pred.labels();
    let points = per_class_youden(pred)?;
    if points.is_empty() {
        return Err(Error::undefined("too few classes with both positives and negatives"));
    }
    let counts: Vec<ClassCounts> = points
        .iter()
        .map(|(&c, op)| {
            let is_c: Vec<bool> = labels.iter().map(|&y| y == c).collect();
            OperatingPoint::counts_at(&pred.class_scores(c), &is_c, op.threshold)
        })
        .collect();
    Ok(MacroMetrics::from_counts(&counts))
}
