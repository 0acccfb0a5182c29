//! Synthetic bags with planted patch-level signal, and O(n²) metric
//! oracles.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureBag, Label, PatchCoord, SurvivalRecord, TaskKind};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

const DIRECTION_STREAM: u64 = 5 << 40;
const CASE_STREAM: u64 = 6 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub task: TaskKind,
    /// Cases per class; the total case count for survival.
    pub n_cases: usize,
    pub n_patches_min: usize,
    pub n_patches_max: usize,
    pub dim: usize,
    pub planted_fraction: f64,
    pub signal_shift: f64,
    pub noise_sd: f64,
    pub seed: u64,
    /// Survival only: event time scale.
    #[serde(default = "default_base_time")]
    pub base_time: f64,
    /// Survival only: log-time decrease per planted patch.
    #[serde(default = "default_risk_scale")]
    pub risk_scale: f64,
    /// Survival only: sd of the log-normal time noise.
    #[serde(default = "default_time_noise")]
    pub time_noise_sd: f64,
    /// Survival only: censoring times are uniform on [0, censor_max].
    #[serde(default = "default_censor_max")]
    pub censor_max: f64,
}

fn default_base_time() -> f64 {
    100.0
}
fn default_risk_scale() -> f64 {
    0.2
}
fn default_time_noise() -> f64 {
    0.25
}
fn default_censor_max() -> f64 {
    300.0
}

impl SynthConfig {
    pub fn new(task: TaskKind, seed: u64) -> Self {
        Self {
            task,
            n_cases: 100,
            n_patches_min: 50,
            n_patches_max: 100,
            dim: 32,
            planted_fraction: 0.1,
            signal_shift: 3.0,
            noise_sd: 1.0,
            seed,
            base_time: default_base_time(),
            risk_scale: default_risk_scale(),
            time_noise_sd: default_time_noise(),
            censor_max: default_censor_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if self.n_cases == 0 || self.dim == 0 {
            return Err(Error::invalid("n_cases and dim must be positive"));
        }
        if self.n_patches_min == 0 || self.n_patches_min > self.n_patches_max {
            return Err(Error::invalid("need 1 <= n_patches_min <= n_patches_max"));
        }
        if !(0.0..=1.0).contains(&self.planted_fraction) {
            return Err(Error::invalid("planted_fraction must lie in [0, 1]"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !self.signal_shift.is_finite() || !positive(self.noise_sd) {
            return Err(Error::invalid("signal_shift must be finite and noise_sd positive"));
        }
        if self.task.is_survival()
            && !(positive(self.base_time) && positive(self.censor_max) && self.risk_scale.is_finite() && self.time_noise_sd >= 0.0)
        {
            return Err(Error::invalid("bad survival time parameters"));
        }
        Ok(())
    }

    fn total_cases(&self) -> usize {
        self.n_cases * self.task.classes().unwrap_or(1)
    }

    /// Planted patches in a positive bag of `n` patches.
    pub fn planted_count(&self, n: usize) -> usize {
        if self.planted_fraction == 0.0 { 0 } else { ((self.planted_fraction * n as f64).round() as usize).clamp(1, n) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub case_id: String,
    pub label: Label,
    pub planted: Vec<usize>,
    /// Survival latent risk; zero for classification.
    pub latent_risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub bags: Vec<FeatureBag>,
    /// Per bag, whether each patch was planted.
    pub masks: Vec<Vec<bool>>,
    pub truth: Vec<GroundTruth>,
    /// Unit signal direction per planted class (index 0 for survival and
    /// binary tasks, class `c` uses index `c - 1`).
    pub directions: Vec<Vec<f64>>,
}

fn unit_direction(seed: u64, k: u64, dim: usize) -> Vec<f64> {
    let mut rng = CounterRng::new(seed, DIRECTION_STREAM + k);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

struct Case {
    bag: FeatureBag,
    mask: Vec<bool>,
    truth: GroundTruth,
}

fn generate_case(cfg: &SynthConfig, directions: &[Vec<f64>], i: usize) -> Result<Case> {
    let mut rng = CounterRng::new(cfg.seed, CASE_STREAM + i as u64);
    let span = (cfg.n_patches_max - cfg.n_patches_min + 1) as u64;
    let n = cfg.n_patches_min + rng.below(span) as usize;
    let classes = cfg.task.classes();
    let class = classes.map(|k| i % k);

    let (n_planted, direction) = match class {
        Some(0) => (0, None),
        Some(c) => (cfg.planted_count(n), Some(&directions[c - 1])),
        None => {
            let max = cfg.planted_count(n);
            (rng.below(max as u64 + 1) as usize, Some(&directions[0]))
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut mask = vec![false; n];
    for &p in &order[..n_planted] {
        mask[p] = true;
    }
    let mut features = Array2::<f32>::zeros((n, cfg.dim));
    for (p, mut row) in features.rows_mut().into_iter().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let mut x = cfg.noise_sd * rng.normal();
            if mask[p] {
                x += cfg.signal_shift * direction.map_or(0.0, |d| d[j]);
            }
            *v = x as f32;
        }
    }

    let latent_risk = cfg.risk_scale * n_planted as f64;
    let label = match class {
        Some(c) => Label::Class(c),
        None => {
            let event_time = cfg.base_time * (-latent_risk).exp() * (cfg.time_noise_sd * rng.normal()).exp();
            let censor = rng.uniform(0.0, cfg.censor_max);
            let (time, event) = if event_time <= censor { (event_time, true) } else { (censor.max(f64::MIN_POSITIVE), false) };
            Label::Survival(SurvivalRecord::new(time, event)?)
        }
    };
    let case_id = format!("case{i:05}");
    let planted = (0..n).filter(|&p| mask[p]).collect();
    let coords = (0..n as u32)
        .map(|p| PatchCoord { slide: 0, x: (p % GRID_COLUMNS) * PATCH_PX, y: (p / GRID_COLUMNS) * PATCH_PX, patch_size: PATCH_PX })
        .collect();
    let mut bag = FeatureBag::new(case_id.clone(), features)?.with_label(label).with_coords(coords)?;
    bag.slide_ids = vec![format!("{case_id}-s0")];
    Ok(Case {
        bag,
        mask,
        truth: GroundTruth { case_id, label, planted, latent_risk: if class.is_none() { latent_risk } else { 0.0 } },
    })
}

/// Patches sit row-major on a single synthetic slide of this many columns.
const GRID_COLUMNS: u32 = 16;
const PATCH_PX: u32 = 256;

/// Deterministic in `cfg`; case `i` draws only from stream `(seed, i)`.
pub fn generate_bags(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let n_dirs = cfg.task.classes().map_or(1, |k| k - 1);
    let directions: Vec<Vec<f64>> = (0..n_dirs as u64).map(|k| unit_direction(cfg.seed, k, cfg.dim)).collect();
    let cases: Vec<Case> = (0..cfg.total_cases()).into_par_iter().map(|i| generate_case(cfg, &directions, i)).collect::<Result<_>>()?;
    let mut data = SynthData { bags: Vec::new(), masks: Vec::new(), truth: Vec::new(), directions };
    for c in cases {
        data.bags.push(c.bag);
        data.masks.push(c.mask);
        data.truth.push(c.truth);
    }
    Ok(data)
}

/// Largest patch projection onto the signal direction: a score that
/// knows where the signal lives.
pub fn oracle_score(bag: &FeatureBag, direction: &[f64]) -> f64 {
    bag.features
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(direction).map(|(&x, d)| x as f64 * d).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `Σ_{i∈pos} Σ_{j∈neg} [s_i > s_j] + ½[s_i = s_j]` over `|pos|·|neg|`.
pub fn brute_force_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimMismatch { expected: scores.len(), got: labels.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (&si, _) in scores.iter().zip(labels).filter(|(_, l)| **l) {
        for (&sj, _) in scores.iter().zip(labels).filter(|(_, l)| !**l) {
            pairs += 1;
            twice += if si > sj { 2 } else if si == sj { 1 } else { 0 };
        }
    }
    if pairs == 0 {
        return Err(Error::undefined("AUC needs at least one positive and one negative case"));
    }
    Ok(twice as f64 / (2 * pairs) as f64)
}

/// Concordance over pairs with `event_i` and `t_i < t_j`; equal risks
/// score ½.
pub fn brute_force_cindex(risks: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    if risks.len() != records.len() {
        return Err(Error::DimMismatch { expected: records.len(), got: risks.len() });
    }
    if risks.iter().any(|r| r.is_nan()) {
        return Err(Error::NonFinite("NaN risk".into()));
    }
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, ri) in records.iter().enumerate() {
        if !ri.event {
            continue;
        }
        for (j, rj) in records.iter().enumerate() {
            if ri.time < rj.time {
                pairs += 1;
                twice += if risks[i] > risks[j] { 2 } else if risks[i] == risks[j] { 1 } else { 0 };
            }
        }
    }
    if pairs == 0 {
        return Err(Error::undefined("no comparable pairs"));
    }
    Ok(twice as f64 / (2 * pairs) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ovr_auc;
    use crate::survival::c_index;
    use proptest::prelude::*;

    fn small(task: TaskKind, seed: u64) -> SynthConfig {
        SynthConfig { n_cases: 40, n_patches_min: 20, n_patches_max: 40, dim: 8, ..SynthConfig::new(task, seed) }
    }

    #[test]
    fn deterministic() {
        let c = small(TaskKind::Binary, 3);
        assert_eq!(generate_bags(&c).unwrap(), generate_bags(&c).unwrap());
        let other = SynthConfig { seed: 4, ..c };
        assert_ne!(generate_bags(&other).unwrap().bags, generate_bags(&small(TaskKind::Binary, 3)).unwrap().bags);
    }

    #[test]
    fn planted_patches_follow_config() {
        let c = small(TaskKind::Binary, 1);
        let d = generate_bags(&c).unwrap();
        for (bag, mask) in d.bags.iter().zip(&d.masks) {
            let planted = mask.iter().filter(|m| **m).count();
            match bag.label {
                Some(Label::Class(1)) => assert_eq!(planted, c.planted_count(bag.n_patches())),
                _ => assert_eq!(planted, 0),
            }
            assert!((c.n_patches_min..=c.n_patches_max).contains(&bag.n_patches()));
        }
        let norm: f64 = d.directions[0].iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_signal_gives_chance_oracle_auc() {
        let c = SynthConfig { n_cases: 500, planted_fraction: 0.0, ..small(TaskKind::Binary, 2) };
        let d = generate_bags(&c).unwrap();
        let scores: Vec<f64> = d.bags.iter().map(|b| oracle_score(b, &d.directions[0])).collect();
        let labels: Vec<bool> = d.bags.iter().map(|b| b.label == Some(Label::Class(1))).collect();
        assert!((ovr_auc(&scores, &labels).unwrap() - 0.5).abs() < 0.05);

        let zero = SynthConfig { signal_shift: 0.0, planted_fraction: 0.1, ..c };
        let d = generate_bags(&zero).unwrap();
        let scores: Vec<f64> = d.bags.iter().map(|b| oracle_score(b, &d.directions[0])).collect();
        assert!((ovr_auc(&scores, &labels).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn planted_signal_is_visible_to_oracle() {
        let d = generate_bags(&small(TaskKind::Binary, 5)).unwrap();
        let scores: Vec<f64> = d.bags.iter().map(|b| oracle_score(b, &d.directions[0])).collect();
        let labels: Vec<bool> = d.bags.iter().map(|b| b.label == Some(Label::Class(1))).collect();
        assert!(ovr_auc(&scores, &labels).unwrap() > 0.95);
    }

    #[test]
    fn multiclass_uses_one_direction_per_planted_class() {
        let d = generate_bags(&small(TaskKind::Multiclass { classes: 4 }, 6)).unwrap();
        assert_eq!(d.directions.len(), 3);
        assert_eq!(d.bags.len(), 160);
        assert_ne!(d.directions[0], d.directions[1]);
    }

    #[test]
    fn survival_risk_orders_times() {
        let c = SynthConfig { n_cases: 400, time_noise_sd: 0.05, censor_max: 1e9, ..small(TaskKind::Survival { bins: 4 }, 7) };
        let d = generate_bags(&c).unwrap();
        let risks: Vec<f64> = d.truth.iter().map(|t| t.latent_risk).collect();
        let recs: Vec<SurvivalRecord> = d.bags.iter().map(|b| b.label.unwrap().survival().unwrap()).collect();
        assert!(brute_force_cindex(&risks, &recs).unwrap() > 0.8);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(brute_force_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(brute_force_auc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert!(brute_force_auc(&[0.1, 0.2], &[true, true]).unwrap_err().is_undefined_metric());
        let recs = |t: &[f64], e: &[bool]| t.iter().zip(e).map(|(&t, &e)| SurvivalRecord { time: t, event: e }).collect::<Vec<_>>();
        assert!((brute_force_cindex(&[3.0, 3.0, 1.0], &recs(&[1.0, 2.0, 3.0], &[true, true, false])).unwrap() - 2.5 / 3.0).abs() < 1e-12);

        // half the scores tied at 0.5: 50 tied positive-negative pairs of
        // 100 contribute 25 of the 62.5 credited pairs
        let mut s = vec![0.5; 10];
        s.extend([1.0; 5]);
        s.extend([0.0; 5]);
        let mut l = vec![true, false].repeat(5);
        l.extend([true; 5]);
        l.extend([false; 5]);
        let auc = brute_force_auc(&s, &l).unwrap();
        assert_eq!(auc, (25.0 * 0.5 + 25.0 + 25.0 + 25.0) / 100.0);
        assert_eq!(auc, ovr_auc(&s, &l).unwrap());
    }

    #[test]
    fn random_300_matches_fast() {
        let mut rng = CounterRng::new(11, 0);
        let s: Vec<f64> = (0..300).map(|_| (rng.next_f64() * 40.0).floor()).collect();
        let l: Vec<bool> = (0..300).map(|_| rng.coin()).collect();
        assert!((brute_force_auc(&s, &l).unwrap() - ovr_auc(&s, &l).unwrap()).abs() < 1e-12);
        let recs: Vec<SurvivalRecord> = (0..300).map(|_| SurvivalRecord { time: rng.below(50) as f64, event: rng.coin() }).collect();
        assert!((brute_force_cindex(&s, &recs).unwrap() - c_index(&s, &recs).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = small(TaskKind::Survival { bins: 4 }, 8);
        let back: SynthConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(SynthConfig { planted_fraction: 1.5, ..c.clone() }.validate().is_err());
        assert!(SynthConfig { n_patches_min: 0, ..c }.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn planted_count_at_least_one(f in 0.001f64..1.0, n in 1usize..500) {
            let c = SynthConfig { planted_fraction: f, ..SynthConfig::new(TaskKind::Binary, 0) };
            let k = c.planted_count(n);
            prop_assert!(k >= 1 && k <= n);
        }
    }
}
