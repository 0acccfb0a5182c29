//! Case bootstrap, paired replicate comparisons and Holm adjustment.
//!
//! Replicate `r` draws its `n` case indices from `CounterRng(seed, r)`
//! into the case list sorted by `case_id`, so a replicate depends only on
//! `(seed, r)` and the cohort, never on thread scheduling or input order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::PredictionSet;
use crate::error::{Error, Result};
use crate::metrics::{confusion_at_argmax, macro_at_youden, macro_auc, MacroValue};
use crate::rng::CounterRng;
use crate::survival::c_index_of;

pub const DEFAULT_REPS: usize = 1000;
const MISSING_WARN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicatePlan {
    pub seed: u64,
    pub n_reps: usize,
}

impl ReplicatePlan {
    pub fn new(seed: u64, n_reps: usize) -> Result<Self> {
        if n_reps < 2 {
            return Err(Error::invalid("a bootstrap needs at least 2 replicates"));
        }
        Ok(Self { seed, n_reps })
    }

    /// With-replacement sample of `n` indices for replicate `r`.
    pub fn sample(&self, r: usize, n: usize) -> Vec<usize> {
        let mut rng = CounterRng::new(self.seed, r as u64);
        (0..n).map(|_| rng.below(n as u64) as usize).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Metric on the full cohort, if defined.
    pub point: Option<f64>,
    /// One slot per replicate; `None` where the metric was undefined.
    pub replicates: Vec<Option<f64>>,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_missing: usize,
}

impl BootstrapResult {
    pub fn from_replicates(point: Option<f64>, replicates: Vec<Option<f64>>) -> Result<Self> {
        let mut defined: Vec<f64> = replicates.iter().flatten().copied().collect();
        if defined.is_empty() {
            return Err(Error::undefined("metric undefined in every replicate"));
        }
        let n_missing = replicates.len() - defined.len();
        if n_missing as f64 > MISSING_WARN_FRACTION * replicates.len() as f64 {
            log::warn!("{n_missing} of {} bootstrap replicates undefined", replicates.len());
        }
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        defined.sort_by(f64::total_cmp);
        Ok(Self {
            point,
            mean,
            ci_lo: percentile(&defined, 0.025),
            ci_hi: percentile(&defined, 0.975),
            n_missing,
            replicates,
        })
    }

    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.replicates.iter().flatten().copied()
    }
}

/// Linear interpolation between order statistics at position `(n-1) p`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

fn run_in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn defined_or_missing(v: Result<f64>) -> Result<Option<f64>> {
    match v {
        Ok(x) => Ok(Some(x)),
        Err(e) if e.is_undefined_metric() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Percentile bootstrap over cases. Thresholded metrics re-derive their
/// thresholds inside each replicate because `metric` sees only the
/// resampled set.
pub fn case_bootstrap<F>(pred: &PredictionSet, metric: F, plan: &ReplicatePlan, threads: Option<usize>) -> Result<BootstrapResult>
where
    F: Fn(&PredictionSet) -> Result<f64> + Sync,
{
    if pred.is_empty() {
        return Err(Error::invalid("cannot bootstrap an empty cohort"));
    }
    let mut canonical: Vec<usize> = (0..pred.len()).collect();
    canonical.sort_by(|&a, &b| pred.cases[a].case_id.cmp(&pred.cases[b].case_id));
    let n = canonical.len();
    let replicates = run_in_pool(threads, || {
        (0..plan.n_reps)
            .into_par_iter()
            .map(|r| {
                let idx: Vec<usize> = plan.sample(r, n).into_iter().map(|k| canonical[k]).collect();
                defined_or_missing(metric(&pred.select(&idx)))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let point = defined_or_missing(metric(pred))?;
    BootstrapResult::from_replicates(point, replicates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    /// `b - a` on the point estimates (replicate means when either point
    /// is undefined).
    pub delta: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_pairs: usize,
}

/// Per-replicate differences `b_r - a_r` over slots defined on both sides.
pub fn paired_differences(reps_a: &[Option<f64>], reps_b: &[Option<f64>]) -> Result<Vec<f64>> {
    if reps_a.len() != reps_b.len() {
        return Err(Error::DimMismatch { expected: reps_a.len(), got: reps_b.len() });
    }
    Ok(reps_a.iter().zip(reps_b).filter_map(|(a, b)| Some((*b)? - (*a)?)).collect())
}

pub fn paired_delta_ci(a: &BootstrapResult, b: &BootstrapResult) -> Result<PairedDelta> {
    let mut d = paired_differences(&a.replicates, &b.replicates)?;
    if d.is_empty() {
        return Err(Error::undefined("no replicate defined on both sides"));
    }
    d.sort_by(f64::total_cmp);
    let delta = match (a.point, b.point) {
        (Some(pa), Some(pb)) => pb - pa,
        _ => b.mean - a.mean,
    };
    Ok(PairedDelta { delta, ci_lo: percentile(&d, 0.025), ci_hi: percentile(&d, 0.975), n_pairs: d.len() })
}

/// Smallest number of non-zero differences accepted by `paired_wilcoxon`.
pub const WILCOXON_MIN_N: usize = 10;

/// Midranks (1-based) of `values`; ties share the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    pub n: usize,
    pub w_plus: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided signed-rank test on `b - a`: zeros dropped, midranks for tied
/// magnitudes, tie-corrected variance, continuity correction 0.5.
pub fn paired_wilcoxon(reps_a: &[f64], reps_b: &[f64]) -> Result<Wilcoxon> {
    if reps_a.len() != reps_b.len() {
        return Err(Error::DimMismatch { expected: reps_a.len(), got: reps_b.len() });
    }
    let d: Vec<f64> = reps_a.iter().zip(reps_b).map(|(a, b)| b - a).filter(|d| *d != 0.0).collect();
    if d.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN replicate difference".into()));
    }
    if d.is_empty() {
        return Ok(Wilcoxon { n: 0, w_plus: 0.0, z: 0.0, p_value: 1.0 });
    }
    if d.len() < WILCOXON_MIN_N {
        return Err(Error::invalid(format!(
            "signed-rank test needs at least {WILCOXON_MIN_N} non-zero differences, got {}",
            d.len()
        )));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len() as f64;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let dev = ((w_plus - n * (n + 1.0) / 4.0).abs() - 0.5).max(0.0);
    let z = if var > 0.0 { dev / var.sqrt() } else { 0.0 };
    let p_value = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(Wilcoxon { n: d.len(), w_plus, z, p_value })
}

/// Holm step-down adjustment, returned in input order.
pub fn holm(pvalues: &[f64]) -> Result<Vec<f64>> {
    if pvalues.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("p-values must lie in [0, 1]"));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (k, &i) in order.iter().enumerate() {
        running = running.max(((m - k) as f64 * pvalues[i]).min(1.0));
        out[i] = running;
    }
    Ok(out)
}

/// Named cohort-level metrics for the bootstrap and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    MacroAuc,
    MacroSensitivity,
    MacroSpecificity,
    MacroPpv,
    MacroNpv,
    YoudenSensitivity,
    YoudenSpecificity,
    YoudenPpv,
    YoudenNpv,
    CIndex,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::MacroAuc,
        MetricKind::MacroSensitivity,
        MetricKind::MacroSpecificity,
        MetricKind::MacroPpv,
        MetricKind::MacroNpv,
        MetricKind::YoudenSensitivity,
        MetricKind::YoudenSpecificity,
        MetricKind::YoudenPpv,
        MetricKind::YoudenNpv,
        MetricKind::CIndex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::MacroAuc => "macro_auc",
            MetricKind::MacroSensitivity => "macro_sensitivity",
            MetricKind::MacroSpecificity => "macro_specificity",
            MetricKind::MacroPpv => "macro_ppv",
            MetricKind::MacroNpv => "macro_npv",
            MetricKind::YoudenSensitivity => "youden_sensitivity",
            MetricKind::YoudenSpecificity => "youden_specificity",
            MetricKind::YoudenPpv => "youden_ppv",
            MetricKind::YoudenNpv => "youden_npv",
            MetricKind::CIndex => "c_index",
        }
    }

    pub fn is_survival(self) -> bool {
        self == MetricKind::CIndex
    }

    pub fn evaluate(self, pred: &PredictionSet) -> Result<f64> {
        let macro_value = |v: MacroValue| v.value.ok_or_else(|| Error::undefined("every class has a zero denominator"));
        match self {
            MetricKind::MacroAuc => macro_auc(pred),
            MetricKind::CIndex => c_index_of(pred),
            MetricKind::MacroSensitivity => macro_value(confusion_at_argmax(pred)?.1.sensitivity),
            MetricKind::MacroSpecificity => macro_value(confusion_at_argmax(pred)?.1.specificity),
            MetricKind::MacroPpv => macro_value(confusion_at_argmax(pred)?.1.ppv),
            MetricKind::MacroNpv => macro_value(confusion_at_argmax(pred)?.1.npv),
            MetricKind::YoudenSensitivity => macro_value(macro_at_youden(pred)?.sensitivity),
            MetricKind::YoudenSpecificity => macro_value(macro_at_youden(pred)?.specificity),
            MetricKind::YoudenPpv => macro_value(macro_at_youden(pred)?.ppv),
            MetricKind::YoudenNpv => macro_value(macro_at_youden(pred)?.npv),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auc" {
            return Ok(MetricKind::MacroAuc);
        }
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CasePrediction, Target};
    use proptest::prelude::*;

    fn binary(scores: &[f64], labels: &[bool]) -> PredictionSet {
        PredictionSet::from_binary_scores(scores, labels).unwrap()
    }

    fn random_set(seed: u64, n: usize) -> PredictionSet {
        let mut rng = CounterRng::new(seed, 3);
        let labels: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
        let scores: Vec<f64> = labels.iter().map(|&y| (rng.normal() + y as u8 as f64).tanh() * 0.5 + 0.5).collect();
        binary(&scores, &labels)
    }

    #[test]
    fn plan_rejects_tiny_and_is_pure() {
        assert!(ReplicatePlan::new(1, 1).is_err());
        let p = ReplicatePlan::new(9, 10).unwrap();
        assert_eq!(p.sample(3, 20), p.sample(3, 20));
        assert_ne!(p.sample(3, 20), p.sample(4, 20));
    }

    #[test]
    fn single_case_has_zero_width() {
        let set = binary(&[0.7], &[true]);
        let plan = ReplicatePlan::new(1, 50).unwrap();
        let r = case_bootstrap(&set, |p| Ok(p.cases[0].scores[1]), &plan, None).unwrap();
        assert_eq!((r.ci_lo, r.ci_hi, r.n_missing), (0.7, 0.7, 0));
    }

    #[test]
    fn all_undefined_is_an_error() {
        let set = binary(&[0.7], &[true]);
        let plan = ReplicatePlan::new(1, 5).unwrap();
        assert!(case_bootstrap(&set, |p| macro_auc(p), &plan, None).is_err());
    }

    #[test]
    fn perfect_classifier_ci_is_one() {
        let labels: Vec<bool> = (0..50).map(|i| i % 2 == 0).collect();
        let scores: Vec<f64> = labels.iter().enumerate().map(|(i, &y)| if y { 0.6 + i as f64 * 1e-3 } else { 0.4 - i as f64 * 1e-3 }).collect();
        let plan = ReplicatePlan::new(5, 1000).unwrap();
        let r = case_bootstrap(&binary(&scores, &labels), |p| macro_auc(p), &plan, None).unwrap();
        assert!(r.defined().all(|v| v == 1.0));
        assert_eq!((r.ci_lo, r.ci_hi), (1.0, 1.0));
    }

    #[test]
    fn deterministic_and_thread_invariant() {
        let set = random_set(4, 80);
        let plan = ReplicatePlan::new(7, 200).unwrap();
        let m = |p: &PredictionSet| MetricKind::YoudenSensitivity.evaluate(p);
        let a = case_bootstrap(&set, m, &plan, Some(1)).unwrap();
        let b = case_bootstrap(&set, m, &plan, Some(1)).unwrap();
        let c = case_bootstrap(&set, m, &plan, Some(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn input_order_does_not_matter() {
        let set = random_set(5, 60);
        let mut rev = set.clone();
        rev.cases.reverse();
        let plan = ReplicatePlan::new(2, 100).unwrap();
        let a = case_bootstrap(&set, |p| macro_auc(p), &plan, None).unwrap();
        let b = case_bootstrap(&rev, |p| macro_auc(p), &plan, None).unwrap();
        assert_eq!(a.replicates, b.replicates);
    }

    #[test]
    fn percentile_matches_linear_interpolation() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&x, 0.0), 1.0);
        assert_eq!(percentile(&x, 1.0), 4.0);
        assert_eq!(percentile(&x, 0.5), 2.5);
        assert!((percentile(&x, 0.025) - 1.075).abs() < 1e-12);
    }

    fn result(reps: Vec<Option<f64>>) -> BootstrapResult {
        BootstrapResult::from_replicates(None, reps).unwrap()
    }

    #[test]
    fn paired_delta_examples() {
        let mut rng = CounterRng::new(1, 1);
        let a: Vec<Option<f64>> = (0..200).map(|_| Some(rng.next_f64())).collect();
        let same = paired_delta_ci(&result(a.clone()), &result(a.clone())).unwrap();
        assert_eq!((same.delta, same.ci_lo, same.ci_hi), (0.0, 0.0, 0.0));
        let shifted: Vec<Option<f64>> = a.iter().map(|v| v.map(|x| x + 0.05)).collect();
        let d = paired_delta_ci(&result(a.clone()), &result(shifted)).unwrap();
        assert!((d.ci_lo - 0.05).abs() < 1e-12 && (d.ci_hi - 0.05).abs() < 1e-12);
        assert!(paired_differences(&a, &a[1..]).is_err());
    }

    #[test]
    fn paired_delta_matches_sort_oracle() {
        let mut rng = CounterRng::new(2, 2);
        let a: Vec<Option<f64>> = (0..1000).map(|i| (i % 97 != 0).then(|| rng.next_f64())).collect();
        let b: Vec<Option<f64>> = (0..1000).map(|i| (i % 89 != 0).then(|| rng.next_f64())).collect();
        let d = paired_delta_ci(&result(a.clone()), &result(b.clone())).unwrap();
        let mut diffs: Vec<f64> = a.iter().zip(&b).filter_map(|(x, y)| Some((*y)? - (*x)?)).collect();
        diffs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let k = diffs.len();
        let at = |p: f64| {
            let h = (k - 1) as f64 * p;
            let i = h as usize;
            diffs[i] + (h - i as f64) * (diffs[i + 1] - diffs[i])
        };
        assert_eq!(d.n_pairs, k);
        assert_eq!(d.ci_lo, at(0.025));
        assert_eq!(d.ci_hi, at(0.975));
    }

    /// Exact two-sided signed-rank p by enumerating all sign patterns,
    /// with ranks doubled to stay integral.
    fn exact_wilcoxon(diffs: &[f64]) -> f64 {
        let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
        let twice: Vec<usize> = midranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>()).iter().map(|r| (2.0 * r) as usize).collect();
        let total: usize = twice.iter().sum();
        let mut counts = vec![0f64; total + 1];
        counts[0] = 1.0;
        for &r in &twice {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let all: f64 = counts.iter().sum();
        let w: usize = d.iter().zip(&twice).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
        let below: f64 = counts[..=w].iter().sum::<f64>() / all;
        let above: f64 = counts[w..].iter().sum::<f64>() / all;
        (2.0 * below.min(above)).min(1.0)
    }

    #[test]
    fn wilcoxon_examples() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(paired_wilcoxon(&a, &a).unwrap().p_value, 1.0);
        let b: Vec<f64> = a.iter().map(|v| v + 0.01).collect();
        let w = paired_wilcoxon(&a, &b).unwrap();
        assert!(w.p_value < 1e-6);
        assert_eq!(w.w_plus, 1000.0 * 1001.0 / 2.0);

        let zeros = vec![0.0; 12];
        let signs: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let w = paired_wilcoxon(&zeros, &signs).unwrap();
        assert!((w.p_value - 1.0).abs() < 1e-12);
        assert!((exact_wilcoxon(&signs) - 1.0).abs() < 1e-12);

        assert!(paired_wilcoxon(&[0.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).is_err());
    }

    #[test]
    fn wilcoxon_normal_tracks_exact() {
        for seed in 0..20 {
            let mut rng = CounterRng::new(seed, 8);
            let n = 15 + (seed as usize % 11);
            let d: Vec<f64> = (0..n).map(|_| ((rng.normal() + 0.4 * (seed % 3) as f64) * 10.0).round() / 10.0).collect();
            let zeros = vec![0.0; n];
            match paired_wilcoxon(&zeros, &d) {
                Ok(w) if w.n >= WILCOXON_MIN_N => {
                    let exact = exact_wilcoxon(&d);
                    assert!((w.p_value - exact).abs() < 0.03, "seed {seed}: {} vs {exact}", w.p_value);
                }
                _ => {}
            }
        }
    }

    #[test]
    fn holm_examples() {
        let h = holm(&[0.01, 0.04, 0.03]).unwrap();
        for (x, y) in h.iter().zip([0.03, 0.06, 0.06]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(holm(&[0.2]).unwrap(), vec![0.2]);
        assert_eq!(holm(&[1.0; 4]).unwrap(), vec![1.0; 4]);
        assert!(holm(&[1.5]).is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(m.name().parse::<MetricKind>().unwrap(), m);
        }
        assert!("nope".parse::<MetricKind>().is_err());
    }

    #[test]
    fn c_index_metric_on_survival_sets() {
        use crate::data::SurvivalRecord;
        let cases = (0..4)
            .map(|i| CasePrediction {
                case_id: format!("c{i}"),
                target: Target::Survival(SurvivalRecord { time: 1.0 + i as f64, event: true }),
                scores: vec![0.2 * i as f64 + 0.1, 0.1 * i as f64],
            })
            .collect();
        let set = PredictionSet::survival(2, cases).unwrap();
        assert_eq!(MetricKind::CIndex.evaluate(&set).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn holm_monotone_and_dominating(p in proptest::collection::vec(0.0f64..=1.0, 1..30)) {
            let h = holm(&p).unwrap();
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            prop_assert!(order.windows(2).all(|w| h[w[0]] <= h[w[1]]));
            prop_assert!(p.iter().zip(&h).all(|(raw, adj)| adj >= raw && *adj <= 1.0));
        }

        #[test]
        fn wilcoxon_is_symmetric(seed in 0u64..5000, n in 10usize..200) {
            let mut rng = CounterRng::new(seed, 4);
            let a: Vec<f64> = (0..n).map(|_| (rng.normal() * 4.0).round()).collect();
            let b: Vec<f64> = (0..n).map(|_| (rng.normal() * 4.0).round()).collect();
            if let (Ok(x), Ok(y)) = (paired_wilcoxon(&a, &b), paired_wilcoxon(&b, &a)) {
                prop_assert_eq!(x.p_value, y.p_value);
            }
        }
    }
}
