use std::fmt;

use ndarray::{Array1, Array2, Dimension, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{compute_loss, Gradients, LossTarget, MilModel, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use crate::data::{CasePrediction, FeatureBag, Label, PredictionSet, Split, SplitAssignment, Target, TaskKind};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

const SHUFFLE_STREAM: u64 = 1 << 40;
const DROPOUT_STREAM: u64 = 2 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Weight decay applied to the weights directly rather than through
    /// the gradient. Biases are never decayed.
    pub decoupled_weight_decay: bool,
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(task: TaskKind) -> Self {
        Self {
            task,
            hidden: DEFAULT_HIDDEN,
            dropout: DEFAULT_DROPOUT,
            learning_rate: 2e-4,
            weight_decay: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            decoupled_weight_decay: true,
            patience: 25,
            max_epochs: 200,
            batch_size: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        let positive = [self.learning_rate, self.adam_beta1, self.adam_beta2, self.adam_eps];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.adam_beta1 >= 1.0 || self.adam_beta2 >= 1.0 {
            return Err(Error::invalid("learning rate, betas and epsilon must be positive (betas below 1)"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if self.hidden == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("hidden size, patience and max_epochs must be positive"));
        }
        if self.patience > self.max_epochs {
            return Err(Error::invalid("patience exceeds max_epochs"));
        }
        if self.batch_size != 1 {
            return Err(Error::invalid("only batch size 1 is supported"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 0-based epoch of the returned checkpoint.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.val_loss.len()
    }

    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }
}

/// Patience counter on strict improvement of the monitored loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: None, stale: 0 }
    }

    /// Records an epoch's loss; true when it is a new best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

/// Interior bin edges at the `k / bins` quantiles of event times. A
/// quantile position falling between two order statistics takes their
/// midpoint.
pub fn survival_bin_edges(event_times: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 1 {
        return Err(Error::invalid("need at least one time bin"));
    }
    if event_times.is_empty() {
        return Err(Error::invalid("no observed events to place time-bin edges"));
    }
    let mut t = event_times.to_vec();
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("event time".into()));
    }
    t.sort_by(f64::total_cmp);
    let n = t.len();
    Ok((1..bins)
        .map(|k| {
            let h = k as f64 / bins as f64 * (n - 1) as f64;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            if lo == hi { t[lo] } else { 0.5 * (t[lo] + t[hi]) }
        })
        .collect())
}

struct AdamSlot<D: Dimension> {
    m: ndarray::Array<f64, D>,
    v: ndarray::Array<f64, D>,
}

impl<D: Dimension> AdamSlot<D> {
    fn like(p: &ndarray::Array<f64, D>) -> Self {
        Self { m: ndarray::Array::zeros(p.raw_dim()), v: ndarray::Array::zeros(p.raw_dim()) }
    }

    #[allow(clippy::too_many_arguments)]
    fn step(&mut self, p: &mut ndarray::Array<f64, D>, g: &ndarray::Array<f64, D>, cfg: &TrainConfig, t: i32, decay: bool) {
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let wd = if decay { cfg.weight_decay } else { 0.0 };
        let coupled = !cfg.decoupled_weight_decay;
        Zip::from(p).and(&mut self.m).and(&mut self.v).and(g).for_each(|p, m, v, &g| {
            let g = if coupled { g + wd * *p } else { g };
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let update = (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
            if coupled {
                *p -= cfg.learning_rate * update;
            } else {
                *p -= cfg.learning_rate * (update + wd * *p);
            }
        });
    }
}

struct Adam {
    v: AdamSlot<ndarray::Ix2>,
    w: AdamSlot<ndarray::Ix1>,
    head_w: AdamSlot<ndarray::Ix2>,
    head_b: AdamSlot<ndarray::Ix1>,
    t: i32,
}

impl Adam {
    fn new(m: &MilModel) -> Self {
        Self {
            v: AdamSlot::like(&m.attn_v),
            w: AdamSlot::like(&m.attn_w),
            head_w: AdamSlot::like(&m.head_w),
            head_b: AdamSlot::like(&m.head_b),
            t: 0,
        }
    }

    fn step(&mut self, m: &mut MilModel, g: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        self.v.step(&mut m.attn_v, &g.attn_v, cfg, self.t, true);
        self.w.step(&mut m.attn_w, &g.attn_w, cfg, self.t, true);
        self.head_w.step(&mut m.head_w, &g.head_w, cfg, self.t, true);
        self.head_b.step(&mut m.head_b, &g.head_b, cfg, self.t, false);
    }
}

/// Mean evaluation-mode loss over bags.
pub fn mean_loss(model: &MilModel, bags: &[&FeatureBag]) -> Result<f64> {
    if bags.is_empty() {
        return Err(Error::invalid("no bags to evaluate"));
    }
    let mut total = 0.0;
    for b in bags {
        let out = model.predict(b, false, None)?;
        total += compute_loss(&out, model.loss_target(b)?)?;
    }
    Ok(total / bags.len() as f64)
}

fn event_times(bags: &[&FeatureBag]) -> Vec<f64> {
    bags.iter()
        .filter_map(|b| match b.label {
            Some(Label::Survival(r)) if r.event => Some(r.time),
            _ => None,
        })
        .collect()
}

/// Adam, one bag per step, one seeded shuffle of Train per epoch, mean
/// Val loss after every epoch. Returns the best-Val-loss checkpoint.
pub fn train(bags: &[FeatureBag], split: &SplitAssignment, config: &TrainConfig) -> Result<(MilModel, TrainReport)> {
    config.validate()?;
    let pick = |s: Split| -> Vec<&FeatureBag> { bags.iter().filter(|b| split.get(&b.case_id) == Some(s)).collect() };
    let train_bags = pick(Split::Train);
    let val_bags = pick(Split::Val);
    if train_bags.is_empty() || val_bags.is_empty() {
        return Err(Error::invalid("train and validation splits must both be non-empty"));
    }
    let dim = train_bags[0].dim();
    for b in train_bags.iter().chain(&val_bags) {
        if b.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, got: b.dim() });
        }
    }

    let mut model = MilModel::new(config.task, dim, config.hidden, config.seed)?;
    model.dropout = config.dropout;
    if let TaskKind::Survival { bins } = config.task {
        let mut times = event_times(&train_bags);
        if times.is_empty() {
            times = train_bags.iter().filter_map(|b| b.label.and_then(|l| l.survival())).map(|r| r.time).collect();
        }
        model.bin_edges = survival_bin_edges(&times, bins)?;
    }
    let targets: Vec<LossTarget> = train_bags.iter().map(|b| model.loss_target(b)).collect::<Result<_>>()?;
    for b in &val_bags {
        model.loss_target(b)?;
    }

    let mut adam = Adam::new(&model);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut order: Vec<usize> = (0..train_bags.len()).collect();
    let mut step: u64 = 0;
    let mut reason = StopReason::MaxEpochs;

    for epoch in 0..config.max_epochs {
        CounterRng::new(config.seed, SHUFFLE_STREAM + epoch as u64).shuffle(&mut order);
        let mut sum = 0.0;
        for &i in &order {
            let mask = (model.dropout > 0.0)
                .then(|| model.dropout_mask(&mut CounterRng::new(config.seed, DROPOUT_STREAM + step)));
            step += 1;
            let (loss, grads) = model
                .backward(train_bags[i], targets[i], mask)
                .map_err(|e| Error::Divergence { epoch, message: e.to_string() })?;
            sum += loss;
            adam.step(&mut model, &grads, config);
        }
        let vl = mean_loss(&model, &val_bags).map_err(|e| Error::Divergence { epoch, message: e.to_string() })?;
        if !vl.is_finite() {
            return Err(Error::Divergence { epoch, message: "validation loss is not finite".into() });
        }
        train_loss.push(sum / order.len() as f64);
        val_loss.push(vl);
        log::debug!("epoch {epoch}: train {:.6} val {vl:.6}", sum / order.len() as f64);
        if stopper.observe(epoch, vl) {
            best = model.clone();
        }
        if stopper.should_stop() {
            reason = StopReason::Patience;
            break;
        }
    }
    let report = TrainReport { train_loss, val_loss, best_epoch: stopper.best_epoch().unwrap_or(0), stop_reason: reason };
    Ok((best, report))
}

/// Evaluation-mode predictions for every bag, in input order.
pub fn predict_set(model: &MilModel, bags: &[FeatureBag]) -> Result<PredictionSet> {
    let cases: Vec<CasePrediction> = bags
        .par_iter()
        .map(|b| {
            let label = b.label.ok_or_else(|| Error::invalid(format!("bag {} has no label", b.case_id)))?;
            let target = match label {
                Label::Class(c) => Target::Class(c),
                Label::Survival(r) => Target::Survival(r),
            };
            let out = model.predict(b, false, None)?;
            Ok(CasePrediction { case_id: b.case_id.clone(), target, scores: out.scores().to_vec() })
        })
        .collect::<Result<_>>()?;
    match model.task {
        TaskKind::Binary => PredictionSet::classification(2, cases),
        TaskKind::Multiclass { classes } => PredictionSet::classification(classes, cases),
        TaskKind::Survival { bins } => PredictionSet::survival(bins, cases),
    }
}

/// Central finite-difference gradient of the eval-mode loss, for checks.
pub fn numeric_gradient(model: &MilModel, bag: &FeatureBag, target: LossTarget, step: f64) -> Result<Gradients> {
    let loss_of = |m: &MilModel| -> Result<f64> { compute_loss(&m.predict(bag, false, None)?, target) };
    let mut work = model.clone();
    let mut diff = |get: &dyn Fn(&mut MilModel) -> &mut f64| -> Result<f64> {
        let orig = *get(&mut work);
        *get(&mut work) = orig + step;
        let up = loss_of(&work)?;
        *get(&mut work) = orig - step;
        let down = loss_of(&work)?;
        *get(&mut work) = orig;
        Ok((up - down) / (2.0 * step))
    };
    let (h, d, o) = (model.hidden(), model.dim(), model.out_dim());
    let mut g = Gradients {
        attn_v: Array2::zeros((h, d)),
        attn_w: Array1::zeros(h),
        head_w: Array2::zeros((o, d)),
        head_b: Array1::zeros(o),
    };
    for i in 0..h {
        for j in 0..d {
            g.attn_v[[i, j]] = diff(&|m| &mut m.attn_v[[i, j]])?;
        }
        g.attn_w[i] = diff(&|m| &mut m.attn_w[i])?;
    }
    for i in 0..o {
        for j in 0..d {
            g.head_w[[i, j]] = diff(&|m| &mut m.head_w[[i, j]])?;
        }
        g.head_b[i] = diff(&|m| &mut m.head_b[i])?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn constant_loss_stops_after_patience() {
        let mut s = EarlyStopping::new(25);
        let mut stopped_at = None;
        for epoch in 0..26 {
            s.observe(epoch, 1.0);
            if s.should_stop() {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(25));
        assert_eq!(s.best_epoch(), Some(0));
    }

    #[test]
    fn ties_are_not_improvements() {
        let mut s = EarlyStopping::new(2);
        assert!(s.observe(0, 1.0));
        assert!(!s.observe(1, 1.0));
        assert!(s.observe(2, 0.999));
        assert!(!s.should_stop());
    }

    #[test]
    fn bin_edges_quartiles() {
        assert_eq!(survival_bin_edges(&[1.0, 2.0, 3.0, 4.0, 5.0], 4).unwrap(), vec![2.0, 3.0, 4.0]);
        assert_eq!(survival_bin_edges(&[4.0, 1.0, 3.0, 2.0], 4).unwrap(), vec![1.5, 2.5, 3.5]);
        assert!(survival_bin_edges(&[], 4).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::new(TaskKind::Binary);
        assert!(c.validate().is_ok());
        c.patience = 300;
        assert!(c.validate().is_err());
        c = TrainConfig::new(TaskKind::Binary);
        c.batch_size = 4;
        assert!(c.validate().is_err());
    }

    fn toy() -> (Vec<FeatureBag>, SplitAssignment) {
        let mk = |id: &str, v: f32, y: usize| {
            FeatureBag::new(id, Array2::from_shape_vec((2, 3), vec![v, 0.5, -v, v, -0.2, 0.1]).unwrap())
                .unwrap()
                .with_label(Label::Class(y))
        };
        let bags = vec![mk("a", 1.0, 1), mk("b", -1.0, 0), mk("c", 1.0, 1), mk("d", -1.0, 0)];
        let mut assignment = BTreeMap::new();
        for (id, s) in [("a", Split::Train), ("b", Split::Train), ("c", Split::Val), ("d", Split::Val)] {
            assignment.insert(id.to_string(), s);
        }
        (bags, SplitAssignment { assignment })
    }

    #[test]
    fn empty_split_rejected() {
        let (bags, mut split) = toy();
        for s in split.assignment.values_mut() {
            *s = Split::Train;
        }
        assert!(train(&bags, &split, &TrainConfig::new(TaskKind::Binary)).is_err());
    }

    #[test]
    fn separable_toy_reaches_flat_loss() {
        let (bags, split) = toy();
        let mut cfg = TrainConfig::new(TaskKind::Binary);
        cfg.hidden = 4;
        cfg.dropout = 0.0;
        cfg.weight_decay = 0.0;
        cfg.learning_rate = 0.05;
        cfg.max_epochs = 2000;
        cfg.patience = 2000;
        let (model, report) = train(&bags, &split, &cfg).unwrap();
        assert!(report.best_val_loss() < 1e-3);
        for b in &bags[..2] {
            let (_, g) = model.backward(b, model.loss_target(b).unwrap(), None).unwrap();
            assert!(g.norm() < 1e-3, "gradient norm {}", g.norm());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (bags, split) = toy();
        let mut cfg = TrainConfig::new(TaskKind::Binary);
        cfg.hidden = 4;
        cfg.max_epochs = 30;
        cfg.seed = 11;
        let a = train(&bags, &split, &cfg).unwrap();
        let b = train(&bags, &split, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.val_loss[a.1.best_epoch], a.1.val_loss.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn coupled_decay_changes_the_trajectory() {
        let (bags, split) = toy();
        let mut cfg = TrainConfig::new(TaskKind::Binary);
        cfg.hidden = 4;
        cfg.max_epochs = 5;
        cfg.patience = 5;
        cfg.weight_decay = 0.1;
        let a = train(&bags, &split, &cfg).unwrap().0;
        cfg.decoupled_weight_decay = false;
        let b = train(&bags, &split, &cfg).unwrap().0;
        assert_ne!(a, b);
    }
}
