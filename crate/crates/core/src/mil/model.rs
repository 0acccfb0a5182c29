use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{FeatureBag, PatchCoord, TaskKind};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

pub const DEFAULT_HIDDEN: usize = 512;
pub const DEFAULT_DROPOUT: f64 = 0.25;
const PROB_CLAMP: f64 = 1e-12;
const INIT_STREAM: u64 = 0x1417;

/// Gated-free attention MIL: `a = softmax_i(w . tanh(V h_i))`,
/// `z = sum_i a_i h_i`, then one linear layer with dropout on `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MilModel {
    pub task: TaskKind,
    /// hidden x dim
    pub attn_v: Array2<f64>,
    /// hidden
    pub attn_w: Array1<f64>,
    /// out x dim
    pub head_w: Array2<f64>,
    /// out
    pub head_b: Array1<f64>,
    pub dropout: f64,
    /// Interior time-bin edges for survival tasks (`bins - 1` values).
    pub bin_edges: Vec<f64>,
}

/// Head width: one logit for binary, one per class, one hazard per bin.
pub fn output_dim(task: TaskKind) -> usize {
    match task {
        TaskKind::Binary => 1,
        TaskKind::Multiclass { classes } => classes,
        TaskKind::Survival { bins } => bins,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossTarget {
    Class(usize),
    /// Time bin of the follow-up and whether the event was observed.
    Survival { bin: usize, event: bool },
}

/// What the head produces for one bag.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskOutput {
    /// `[1 - p, p]` for binary, softmax for multiclass.
    Probabilities(Vec<f64>),
    Survival { hazards: Vec<f64>, survival: Vec<f64> },
}

impl TaskOutput {
    /// Class probabilities or per-bin survival, the `PredictionSet` scores.
    pub fn scores(&self) -> &[f64] {
        match self {
            TaskOutput::Probabilities(p) => p,
            TaskOutput::Survival { survival, .. } => survival,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub features: Array2<f64>,
    /// tanh(V h_i), n x hidden
    pub hidden: Array2<f64>,
    pub scores: Array1<f64>,
    pub attention: Array1<f64>,
    pub embedding: Array1<f64>,
    /// Per-component multiplier applied to the embedding (0 or 1/(1-p)).
    pub dropout_scale: Option<Array1<f64>>,
    pub logits: Array1<f64>,
    pub output: TaskOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub attn_v: Array2<f64>,
    pub attn_w: Array1<f64>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        let sq = |it: ndarray::iter::Iter<'_, f64, _>| it.map(|g| g * g).sum::<f64>();
        (self.attn_v.iter().map(|g| g * g).sum::<f64>()
            + sq(self.attn_w.iter())
            + self.head_w.iter().map(|g| g * g).sum::<f64>()
            + self.head_b.iter().map(|g| g * g).sum::<f64>())
        .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.attn_v.iter().chain(self.attn_w.iter()).chain(self.head_w.iter()).chain(self.head_b.iter()).all(|g| g.is_finite())
    }
}

impl MilModel {
    /// Zero biases, weights uniform in +-sqrt(6 / (fan_in + fan_out)).
    pub fn new(task: TaskKind, dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        task.validate()?;
        if dim == 0 || hidden == 0 {
            return Err(Error::invalid("feature and hidden dimensions must be positive"));
        }
        let out = output_dim(task);
        let mut rng = CounterRng::new(seed, INIT_STREAM);
        let mut glorot = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.uniform(-limit, limit))
        };
        let attn_v = glorot(hidden, dim, dim, hidden);
        let attn_w = glorot(1, hidden, hidden, 1).remove_axis(Axis(0));
        let head_w = glorot(out, dim, dim, out);
        Ok(Self {
            task,
            attn_v,
            attn_w,
            head_w,
            head_b: Array1::zeros(out),
            dropout: DEFAULT_DROPOUT,
            bin_edges: Vec::new(),
        })
    }

    /// Model with every parameter zero.
    pub fn zeros(task: TaskKind, dim: usize, hidden: usize) -> Result<Self> {
        let mut m = Self::new(task, dim, hidden, 0)?;
        m.attn_v.fill(0.0);
        m.attn_w.fill(0.0);
        m.head_w.fill(0.0);
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.attn_v.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.attn_v.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.head_b.len()
    }

    pub fn n_params(&self) -> usize {
        self.attn_v.len() + self.attn_w.len() + self.head_w.len() + self.head_b.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        let (h, d, o) = (self.hidden(), self.dim(), output_dim(self.task));
        if self.attn_w.len() != h {
            return Err(Error::DimMismatch { expected: h, got: self.attn_w.len() });
        }
        if self.head_w.dim() != (o, d) {
            return Err(Error::DimMismatch { expected: o * d, got: self.head_w.len() });
        }
        if self.head_b.len() != o {
            return Err(Error::DimMismatch { expected: o, got: self.head_b.len() });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        let finite = self
            .attn_v
            .iter()
            .chain(self.attn_w.iter())
            .chain(self.head_w.iter())
            .chain(self.head_b.iter())
            .all(|p| p.is_finite());
        if !finite {
            return Err(Error::NonFinite("model parameter".into()));
        }
        if let TaskKind::Survival { bins } = self.task {
            if !self.bin_edges.is_empty() && self.bin_edges.len() != bins - 1 {
                return Err(Error::DimMismatch { expected: bins - 1, got: self.bin_edges.len() });
            }
        }
        Ok(())
    }

    fn check_bag(&self, bag: &FeatureBag) -> Result<()> {
        if bag.dim() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), got: bag.dim() });
        }
        Ok(())
    }

    /// Pre-softmax attention scores `w . tanh(V h_i)`.
    pub fn attention_scores(&self, bag: &FeatureBag) -> Result<Array1<f64>> {
        self.check_bag(bag)?;
        let h = bag.features.mapv(f64::from);
        Ok(h.dot(&self.attn_v.t()).mapv(f64::tanh).dot(&self.attn_w))
    }

    pub fn attention_weights(&self, bag: &FeatureBag) -> Result<Array1<f64>> {
        let s = self.attention_scores(bag)?;
        Ok(Array1::from(softmax(s.as_slice().unwrap())))
    }

    /// The bin index for a follow-up time: bins are `(-inf, e1], (e1, e2], ...`.
    pub fn time_bin(&self, time: f64) -> usize {
        self.bin_edges.iter().filter(|&&e| time > e).count()
    }

    pub fn loss_target(&self, bag: &FeatureBag) -> Result<LossTarget> {
        let label = bag.label.ok_or_else(|| Error::invalid(format!("bag {} has no label", bag.case_id)))?;
        match (self.task, label) {
            (TaskKind::Survival { .. }, crate::data::Label::Survival(r)) => {
                Ok(LossTarget::Survival { bin: self.time_bin(r.time), event: r.event })
            }
            (TaskKind::Survival { .. }, _) => Err(Error::invalid("survival task needs survival labels")),
            (_, crate::data::Label::Class(c)) => {
                let k = self.task.classes().unwrap();
                if c >= k {
                    return Err(Error::invalid(format!("label {c} out of range for {k} classes")));
                }
                Ok(LossTarget::Class(c))
            }
            _ => Err(Error::invalid("classification task needs class labels")),
        }
    }

    /// Forward pass. `dropout_scale` multiplies the embedding component-wise.
    pub fn forward(&self, bag: &FeatureBag, dropout_scale: Option<Array1<f64>>) -> Result<Forward> {
        self.check_bag(bag)?;
        let features = bag.features.mapv(f64::from);
        let hidden = features.dot(&self.attn_v.t()).mapv(f64::tanh);
        let scores = hidden.dot(&self.attn_w);
        let attention = Array1::from(softmax(scores.as_slice().unwrap()));
        let embedding = attention.dot(&features);
        let dropped = match &dropout_scale {
            Some(m) => &embedding * m,
            None => embedding.clone(),
        };
        let logits = self.head_w.dot(&dropped) + &self.head_b;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("logits for bag {}", bag.case_id)));
        }
        let output = match self.task {
            TaskKind::Binary => {
                let p = sigmoid(logits[0]);
                TaskOutput::Probabilities(vec![1.0 - p, p])
            }
            TaskKind::Multiclass { .. } => TaskOutput::Probabilities(softmax(logits.as_slice().unwrap())),
            TaskKind::Survival { .. } => {
                let hazards: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
                let mut s = 1.0;
                let survival = hazards
                    .iter()
                    .map(|q| {
                        s *= 1.0 - q;
                        s
                    })
                    .collect();
                TaskOutput::Survival { hazards, survival }
            }
        };
        Ok(Forward { features, hidden, scores, attention, embedding, dropout_scale, logits, output })
    }

    /// Inverted-dropout mask for the embedding.
    pub fn dropout_mask(&self, rng: &mut CounterRng) -> Array1<f64> {
        let keep = 1.0 - self.dropout;
        Array1::from_shape_fn(self.dim(), |_| if rng.next_f64() < self.dropout { 0.0 } else { 1.0 / keep })
    }

    /// Prediction; dropout is applied only in train mode and needs an RNG.
    pub fn predict(&self, bag: &FeatureBag, train_mode: bool, rng: Option<&mut CounterRng>) -> Result<TaskOutput> {
        let mask = match (train_mode && self.dropout > 0.0, rng) {
            (true, Some(r)) => Some(self.dropout_mask(r)),
            (true, None) => return Err(Error::invalid("train-mode prediction needs an RNG")),
            (false, _) => None,
        };
        Ok(self.forward(bag, mask)?.output)
    }

    /// Loss and gradients of every parameter for one bag.
    pub fn backward(&self, bag: &FeatureBag, target: LossTarget, dropout_scale: Option<Array1<f64>>) -> Result<(f64, Gradients)> {
        let fw = self.forward(bag, dropout_scale)?;
        let loss = compute_loss(&fw.output, target)?;
        let d_logits = logit_gradient(&fw.output, target, &fw.logits);

        let dropped = match &fw.dropout_scale {
            Some(m) => &fw.embedding * m,
            None => fw.embedding.clone(),
        };
        let head_w = outer(&d_logits, &dropped);
        let head_b = d_logits.clone();
        let mut d_embedding = self.head_w.t().dot(&d_logits);
        if let Some(m) = &fw.dropout_scale {
            d_embedding *= m;
        }
        // z = sum a_i h_i
        let d_attention = fw.features.dot(&d_embedding);
        let weighted = fw.attention.dot(&d_attention);
        let d_scores = &fw.attention * &(d_attention - weighted);
        // s_i = w . t_i
        let attn_w = fw.hidden.t().dot(&d_scores);
        let d_hidden = outer(&d_scores, &self.attn_w);
        let d_pre = d_hidden * fw.hidden.mapv(|t| 1.0 - t * t);
        let attn_v = d_pre.t().dot(&fw.features);

        let grads = Gradients { attn_v, attn_w, head_w, head_b };
        if !grads.all_finite() || !loss.is_finite() {
            return Err(Error::NonFinite(format!("gradient for bag {}", bag.case_id)));
        }
        Ok((loss, grads))
    }

    /// Patches ranked by attention weight, highest first; ties keep patch order.
    pub fn export_attention(&self, bag: &FeatureBag) -> Result<Vec<AttentionRecord>> {
        let coords = bag
            .coords
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("bag {} has no patch coordinates", bag.case_id)))?;
        let a = self.attention_weights(bag)?;
        let mut order: Vec<usize> = (0..a.len()).collect();
        order.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(i.cmp(&j)));
        Ok(order
            .into_iter()
            .enumerate()
            .map(|(r, i)| AttentionRecord {
                patch_index: i,
                slide_id: bag.slide_ids.get(coords[i].slide as usize).cloned().unwrap_or_default(),
                coord: coords[i],
                weight: a[i],
                rank: r + 1,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub patch_index: usize,
    pub slide_id: String,
    pub coord: PatchCoord,
    pub weight: f64,
    pub rank: usize,
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// BCE, categorical CE, or the discrete-time survival NLL
/// (event in bin m: `-ln q_m - sum_{k<m} ln(1-q_k)`; censored in bin m:
/// `-sum_{k<=m} ln(1-q_k)`). Probabilities are clamped to
/// `[1e-12, 1 - 1e-12]` before the logs.
pub fn compute_loss(output: &TaskOutput, target: LossTarget) -> Result<f64> {
    match (output, target) {
        (TaskOutput::Probabilities(p), LossTarget::Class(y)) => {
            if y >= p.len() {
                return Err(Error::invalid(format!("class {y} out of range")));
            }
            if p.len() == 2 {
                let q = clamp_p(p[1]);
                let y = y as f64;
                Ok(-(y * q.ln() + (1.0 - y) * (1.0 - q).ln()))
            } else {
                Ok(-clamp_p(p[y]).ln())
            }
        }
        (TaskOutput::Survival { hazards, .. }, LossTarget::Survival { bin, event }) => {
            if bin >= hazards.len() {
                return Err(Error::invalid(format!("time bin {bin} out of range")));
            }
            let survived: f64 = hazards[..bin].iter().map(|q| -(1.0 - clamp_p(*q)).ln()).sum();
            let last = if event { -clamp_p(hazards[bin]).ln() } else { -(1.0 - clamp_p(hazards[bin])).ln() };
            Ok(survived + last)
        }
        _ => Err(Error::invalid("loss target does not match the task output")),
    }
}

/// d loss / d logits, ignoring the probability clamp.
fn logit_gradient(output: &TaskOutput, target: LossTarget, logits: &Array1<f64>) -> Array1<f64> {
    match (output, target) {
        (TaskOutput::Probabilities(p), LossTarget::Class(y)) if logits.len() == 1 => {
            Array1::from(vec![p[1] - y as f64])
        }
        (TaskOutput::Probabilities(p), LossTarget::Class(y)) => {
            let mut g = Array1::from(p.clone());
            g[y] -= 1.0;
            g
        }
        (TaskOutput::Survival { hazards, .. }, LossTarget::Survival { bin, event }) => {
            let mut g = Array1::zeros(hazards.len());
            for k in 0..bin {
                g[k] = hazards[k];
            }
            g[bin] = if event { hazards[bin] - 1.0 } else { hazards[bin] };
            g
        }
        _ => unreachable!("checked by compute_loss"),
    }
}
