//! Decision-curve analysis and threshold selection for triage.
//!
//! A case is called positive when its score is `>=` the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetBenefitPoint {
    pub p_t: f64,
    pub nb_model: f64,
    pub nb_treat_all: f64,
    pub nb_treat_none: f64,
}

fn check_pair(probs: &[f64], labels: &[bool]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::DimMismatch { expected: probs.len(), got: labels.len() });
    }
    if probs.is_empty() {
        return Err(Error::invalid("no cases"));
    }
    if probs.iter().any(|p| p.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    Ok(())
}

/// `NB = TP/N - FP/N * p_t / (1 - p_t)`.
pub fn net_benefit(probs: &[f64], labels: &[bool], p_t: f64) -> Result<NetBenefitPoint> {
    check_pair(probs, labels)?;
    if !(p_t > 0.0 && p_t < 1.0) {
        return Err(Error::invalid(format!("threshold probability {p_t} outside (0, 1)")));
    }
    let n = probs.len() as f64;
    let odds = p_t / (1.0 - p_t);
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&p, &y) in probs.iter().zip(labels) {
        if p >= p_t {
            if y {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let prevalence = labels.iter().filter(|y| **y).count() as f64 / n;
    Ok(NetBenefitPoint {
        p_t,
        nb_model: tp as f64 / n - fp as f64 / n * odds,
        nb_treat_all: prevalence - (1.0 - prevalence) * odds,
        nb_treat_none: 0.0,
    })
}

/// 0.01, 0.02, ..., 0.99.
pub fn default_grid() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

pub fn dca_curve(probs: &[f64], labels: &[bool], grid: &[f64]) -> Result<Vec<NetBenefitPoint>> {
    grid.iter().map(|&p_t| net_benefit(probs, labels, p_t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriageOperatingPoint {
    pub threshold: f64,
    pub deferred_count: usize,
    pub total_count: usize,
    pub defer_fraction: f64,
    pub ppv: f64,
    /// Fraction of positives that land in the deferred set.
    pub sensitivity: f64,
    /// Fraction of negatives left in the reviewer pool.
    pub specificity_retained: f64,
    pub tp_in_deferred: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl TriageOperatingPoint {
    fn at(probs: &[f64], labels: &[bool], threshold: f64) -> Self {
        let positives = labels.iter().filter(|y| **y).count();
        let negatives = labels.len() - positives;
        let (mut deferred, mut tp) = (0usize, 0usize);
        for (&p, &y) in probs.iter().zip(labels) {
            if p >= threshold {
                deferred += 1;
                tp += y as usize;
            }
        }
        let fp = deferred - tp;
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            threshold,
            deferred_count: deferred,
            total_count: labels.len(),
            defer_fraction: ratio(deferred, labels.len()),
            ppv: ratio(tp, deferred),
            sensitivity: ratio(tp, positives),
            specificity_retained: ratio(negatives - fp, negatives),
            tp_in_deferred: tp,
            positives,
            negatives,
        }
    }
}

/// Lowest observed score whose deferred set `{p >= cutoff}` is non-empty
/// and has PPV at or above `ppv_floor`.
pub fn triage_sweep(probs: &[f64], labels: &[bool], ppv_floor: f64) -> Result<TriageOperatingPoint> {
    check_pair(probs, labels)?;
    if !labels.iter().any(|y| *y) {
        return Err(Error::invalid("triage needs at least one positive case"));
    }
    if !(0.0..=1.0).contains(&ppv_floor) {
        return Err(Error::invalid("PPV floor must lie in [0, 1]"));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let n = order.len();
    let mut tp_above = labels.iter().filter(|y| **y).count();
    let mut i = 0;
    while i < n {
        let cutoff = probs[order[i]];
        let deferred = n - i;
        if tp_above as f64 / deferred as f64 >= ppv_floor {
            return Ok(TriageOperatingPoint::at(probs, labels, cutoff));
        }
        while i < n && probs[order[i]] == cutoff {
            tp_above -= labels[order[i]] as usize;
            i += 1;
        }
    }
    Err(Error::FloorUnattainable { floor: ppv_floor })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledTriage {
    pub deferred: usize,
    pub total: usize,
    pub tp: usize,
    pub defer_fraction: f64,
    pub ppv: f64,
}

/// Sums deferred, true-positive and total counts across markers.
pub fn pool_markers(points: &[TriageOperatingPoint]) -> Result<PooledTriage> {
    if points.is_empty() {
        return Err(Error::invalid("nothing to pool"));
    }
    let deferred: usize = points.iter().map(|p| p.deferred_count).sum();
    let total: usize = points.iter().map(|p| p.total_count).sum();
    let tp: usize = points.iter().map(|p| p.tp_in_deferred).sum();
    if deferred == 0 {
        return Err(Error::undefined("no deferred cases across markers"));
    }
    Ok(PooledTriage { deferred, total, tp, defer_fraction: deferred as f64 / total as f64, ppv: tp as f64 / deferred as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissedAtSpecificity {
    /// `+inf` when no observed cutoff reaches the floor.
    pub threshold: f64,
    pub missed: usize,
    pub specificity: f64,
}

/// Lowest observed-score cutoff with specificity `>= spec_floor`; missed
/// positives are those scored below it.
pub fn missed_at_specificity(probs: &[f64], labels: &[bool], spec_floor: f64) -> Result<MissedAtSpecificity> {
    check_pair(probs, labels)?;
    let positives = labels.iter().filter(|y| **y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::undefined("both classes are needed"));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let (mut neg_below, mut pos_below) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let cutoff = probs[order[i]];
        let specificity = neg_below as f64 / negatives as f64;
        if specificity >= spec_floor {
            return Ok(MissedAtSpecificity { threshold: cutoff, missed: pos_below, specificity });
        }
        while i < order.len() && probs[order[i]] == cutoff {
            if labels[order[i]] {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
    }
    Ok(MissedAtSpecificity { threshold: f64::INFINITY, missed: positives, specificity: 1.0 })
}
