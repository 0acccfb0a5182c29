use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Condition, ReaderObservation};
use crate::error::{Error, Result};
use crate::resample::{BootstrapResult, ReplicatePlan};
use crate::rng::CounterRng;

/// Fraction of degenerate replicates above which inference fails.
const MAX_DEGENERATE: f64 = 0.05;
/// Stream offset keeping permutation draws apart from bootstrap draws.
const PERMUTATION_STREAM: u64 = 3 << 40;

/// Fleiss' κ over an item × category count matrix.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<f64> {
    let first = counts.first().ok_or_else(|| Error::invalid("no items to rate"))?;
    let cats = first.len();
    let n: usize = first.iter().sum();
    if n < 2 {
        return Err(Error::invalid("each item needs at least two raters"));
    }
    let mut col = vec![0usize; cats];
    let mut p_bar = 0.0;
    for (i, row) in counts.iter().enumerate() {
        if row.len() != cats {
            return Err(Error::DimMismatch { expected: cats, got: row.len() });
        }
        if row.iter().sum::<usize>() != n {
            return Err(Error::invalid(format!("item {i} has a different number of raters")));
        }
        let agree: usize = row.iter().map(|&c| c * c.saturating_sub(1)).sum();
        p_bar += agree as f64 / (n * (n - 1)) as f64;
        for (c, &v) in col.iter_mut().zip(row) {
            *c += v;
        }
    }
    let total = (counts.len() * n) as f64;
    p_bar /= counts.len() as f64;
    let p_e: f64 = col.iter().map(|&c| (c as f64 / total).powi(2)).sum();
    if p_e >= 1.0 - 1e-15 {
        return Err(Error::undefined("all ratings fall into one category"));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

pub fn kappa_band(kappa: f64) -> &'static str {
    match kappa {
        k if k <= 0.20 => "poor",
        k if k <= 0.40 => "fair",
        k if k <= 0.60 => "moderate",
        k if k <= 0.80 => "substantial",
        _ => "almost perfect",
    }
}

/// Per-case category counts under each condition, over a shared
/// category list.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingProfiles {
    pub items: Vec<(String, String)>,
    pub categories: Vec<String>,
    pub unassisted: Vec<Vec<usize>>,
    pub assisted: Vec<Vec<usize>>,
}

pub fn rating_profiles(obs: &[ReaderObservation]) -> Result<RatingProfiles> {
    let categories: Vec<String> = obs.iter().map(|o| o.diagnosis.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&str, usize> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut per_item: BTreeMap<(String, String), [Vec<usize>; 2]> = BTreeMap::new();
    for o in obs {
        let entry = per_item
            .entry((o.task.clone(), o.case_id.clone()))
            .or_insert_with(|| [vec![0; categories.len()], vec![0; categories.len()]]);
        entry[(o.condition == Condition::Assisted) as usize][index[o.diagnosis.as_str()]] += 1;
    }
    let mut out = RatingProfiles { items: Vec::new(), categories, unassisted: Vec::new(), assisted: Vec::new() };
    for (item, [u, a]) in per_item {
        if u.iter().sum::<usize>() == 0 || a.iter().sum::<usize>() == 0 {
            return Err(Error::invalid(format!("case {} lacks reads under one condition", item.1)));
        }
        out.items.push(item);
        out.unassisted.push(u);
        out.assisted.push(a);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub kappa: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub band: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaInference {
    pub n_items: usize,
    pub unassisted: KappaEstimate,
    pub assisted: KappaEstimate,
    /// Assisted minus unassisted.
    pub delta: f64,
    pub delta_ci_lo: f64,
    pub delta_ci_hi: f64,
    pub p_value: f64,
    pub n_perm: usize,
}

fn select(rows: &[Vec<usize>], idx: &[usize]) -> Vec<Vec<usize>> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

fn undefined_as_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_undefined_metric() => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_degenerate(missing: usize, total: usize, what: &str) -> Result<()> {
    if missing as f64 > MAX_DEGENERATE * total as f64 {
        return Err(Error::undefined(format!("{what}: κ undefined in {missing} of {total} replicates")));
    }
    Ok(())
}

/// κ per condition with case-bootstrap CIs and a paired permutation test
/// of Δκ that swaps each case's two rating profiles with probability 1/2.
pub fn kappa_inference(obs: &[ReaderObservation], n_boot: usize, n_perm: usize, seed: u64) -> Result<KappaInference> {
    if n_boot == 0 || n_perm == 0 {
        return Err(Error::invalid("replicate counts must be positive"));
    }
    let prof = rating_profiles(obs)?;
    let (u, a) = (&prof.unassisted, &prof.assisted);
    let k_u = fleiss_kappa(u)?;
    let k_a = fleiss_kappa(a)?;
    let delta = k_a - k_u;
    let n = prof.items.len();

    let plan = ReplicatePlan::new(seed, n_boot)?;
    let boot: Vec<(Option<f64>, Option<f64>)> = (0..n_boot)
        .into_par_iter()
        .map(|r| {
            let idx = plan.sample(r, n);
            Ok((undefined_as_none(fleiss_kappa(&select(u, &idx)))?, undefined_as_none(fleiss_kappa(&select(a, &idx)))?))
        })
        .collect::<Result<_>>()?;
    let bu: Vec<Option<f64>> = boot.iter().map(|b| b.0).collect();
    let ba: Vec<Option<f64>> = boot.iter().map(|b| b.1).collect();
    let bd: Vec<Option<f64>> = boot.iter().map(|b| Some(b.1? - b.0?)).collect();
    let ru = BootstrapResult::from_replicates(Some(k_u), bu)?;
    let ra = BootstrapResult::from_replicates(Some(k_a), ba)?;
    let rd = BootstrapResult::from_replicates(Some(delta), bd)?;
    check_degenerate(rd.n_missing, n_boot, "bootstrap")?;

    let perm: Vec<Option<f64>> = (0..n_perm)
        .into_par_iter()
        .map(|r| {
            let mut rng = CounterRng::new(seed, PERMUTATION_STREAM + r as u64);
            let mut pu = Vec::with_capacity(n);
            let mut pa = Vec::with_capacity(n);
            for i in 0..n {
                let (x, y) = if rng.coin() { (&a[i], &u[i]) } else { (&u[i], &a[i]) };
                pu.push(x.clone());
                pa.push(y.clone());
            }
            let ku = undefined_as_none(fleiss_kappa(&pu))?;
            let ka = undefined_as_none(fleiss_kappa(&pa))?;
            Ok(ku.zip(ka).map(|(ku, ka)| ka - ku))
        })
        .collect::<Result<_>>()?;
    let degenerate = perm.iter().filter(|d| d.is_none()).count();
    check_degenerate(degenerate, n_perm, "permutation")?;
    let threshold = delta.abs() - 1e-12;
    let extreme = perm.iter().flatten().filter(|d| d.abs() >= threshold).count();
    let p_value = (1 + extreme) as f64 / (n_perm + 1) as f64;

    let estimate = |k: f64, r: &BootstrapResult| KappaEstimate { kappa: k, ci_lo: r.ci_lo, ci_hi: r.ci_hi, band: kappa_band(k).into() };
    Ok(KappaInference {
        n_items: n,
        unassisted: estimate(k_u, &ru),
        assisted: estimate(k_a, &ra),
        delta,
        delta_ci_lo: rd.ci_lo,
        delta_ci_hi: rd.ci_hi,
        p_value,
        n_perm,
    })
}
