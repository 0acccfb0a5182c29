//! Shared data model: bags, labels, prediction sets and dataset splits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

pub const DEFAULT_FEATURE_DIM: usize = 2560;
pub const DEFAULT_SURVIVAL_BINS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskKind {
    Binary,
    Multiclass { classes: usize },
    Survival { bins: usize },
}

impl TaskKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TaskKind::Binary => Ok(()),
            TaskKind::Multiclass { classes } if classes >= 3 => Ok(()),
            TaskKind::Multiclass { classes } => Err(Error::invalid(format!(
                "multiclass needs at least 3 classes, got {classes}"
            ))),
            TaskKind::Survival { bins } if bins >= 2 => Ok(()),
            TaskKind::Survival { bins } => Err(Error::invalid(format!(
                "survival needs at least 2 time bins, got {bins}"
            ))),
        }
    }

    /// Number of classes for classification tasks, `None` for survival.
    pub fn classes(&self) -> Option<usize> {
        match *self {
            TaskKind::Binary => Some(2),
            TaskKind::Multiclass { classes } => Some(classes),
            TaskKind::Survival { .. } => None,
        }
    }

    pub fn is_survival(&self) -> bool {
        matches!(self, TaskKind::Survival { .. })
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Binary => write!(f, "binary"),
            TaskKind::Multiclass { classes } => write!(f, "multiclass:{classes}"),
            TaskKind::Survival { bins } => write!(f, "survival:{bins}"),
        }
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parse_arg = |default: Option<usize>| -> Result<usize> {
            match arg {
                Some(a) => a
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad task argument in {s:?}"))),
                None => default.ok_or_else(|| Error::invalid(format!("{s:?} needs a count"))),
            }
        };
        let task = match name {
            "binary" => TaskKind::Binary,
            "multiclass" => TaskKind::Multiclass { classes: parse_arg(None)? },
            "survival" => TaskKind::Survival { bins: parse_arg(Some(DEFAULT_SURVIVAL_BINS))? },
            _ => return Err(Error::invalid(format!("unknown task {s:?}"))),
        };
        task.validate()?;
        Ok(task)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    /// Follow-up in months.
    pub time: f64,
    /// `true` when the event was observed, `false` when censored.
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::invalid(format!("survival time must be finite and positive, got {time}")));
        }
        Ok(Self { time, event })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(usize),
    Survival(SurvivalRecord),
}

impl Label {
    pub fn class(&self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(*c),
            Label::Survival(_) => None,
        }
    }

    pub fn survival(&self) -> Option<SurvivalRecord> {
        match self {
            Label::Survival(r) => Some(*r),
            Label::Class(_) => None,
        }
    }

    /// Key used for stratified splitting: the class, or the event flag.
    fn stratum(&self) -> String {
        match self {
            Label::Class(c) => c.to_string(),
            Label::Survival(r) => if r.event { "event" } else { "censored" }.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchCoord {
    /// Index into the bag's `slide_ids`.
    pub slide: u32,
    pub x: u32,
    pub y: u32,
    pub patch_size: u32,
}

/// One case's patch features. Multi-slide cases are concatenated into a
/// single bag; `slide_ids` lists the contributing slides in order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBag {
    pub case_id: String,
    pub slide_ids: Vec<String>,
    pub features: Array2<f32>,
    pub coords: Option<Vec<PatchCoord>>,
    pub label: Option<Label>,
}

impl FeatureBag {
    pub fn new(case_id: impl Into<String>, features: Array2<f32>) -> Result<Self> {
        let bag = Self {
            case_id: case_id.into(),
            slide_ids: Vec::new(),
            features,
            coords: None,
            label: None,
        };
        bag.validate()?;
        Ok(bag)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_coords(mut self, coords: Vec<PatchCoord>) -> Result<Self> {
        self.coords = Some(coords);
        self.validate()?;
        Ok(self)
    }

    pub fn n_patches(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_patches() == 0 {
            return Err(Error::invalid(format!("bag {} has no patches", self.case_id)));
        }
        if self.dim() == 0 {
            return Err(Error::invalid(format!("bag {} has zero feature dimension", self.case_id)));
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "bag {} feature {} (patch {})",
                self.case_id,
                pos,
                pos / self.dim()
            )));
        }
        if let Some(coords) = &self.coords {
            if coords.len() != self.n_patches() {
                return Err(Error::DimMismatch { expected: self.n_patches(), got: coords.len() });
            }
        }
        Ok(())
    }
}

/// The target of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Survival(SurvivalRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePrediction {
    pub case_id: String,
    pub target: Target,
    /// Class probabilities (classification) or per-bin survival
    /// probabilities (survival).
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictionKind {
    Classification { classes: usize },
    Survival { bins: usize },
}

/// True labels plus predicted score vectors for a cohort. The input to
/// every metric and to the case bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub kind: PredictionKind,
    pub cases: Vec<CasePrediction>,
}

const PROB_SUM_TOL: f64 = 1e-9;

impl PredictionSet {
    pub fn classification(classes: usize, cases: Vec<CasePrediction>) -> Result<Self> {
        let set = Self { kind: PredictionKind::Classification { classes }, cases };
        set.validate()?;
        Ok(set)
    }

    pub fn survival(bins: usize, cases: Vec<CasePrediction>) -> Result<Self> {
        let set = Self { kind: PredictionKind::Survival { bins }, cases };
        set.validate()?;
        Ok(set)
    }

    /// Binary set from positive-class scores; stored as `[1 - p, p]`.
    pub fn from_binary_scores(scores: &[f64], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimMismatch { expected: scores.len(), got: labels.len() });
        }
        let cases = scores
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&p, &y))| CasePrediction {
                case_id: format!("case{i:05}"),
                target: Target::Class(y as usize),
                scores: vec![1.0 - p, p],
            })
            .collect();
        Self::classification(2, cases)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self.kind {
            PredictionKind::Classification { classes } => Some(classes),
            PredictionKind::Survival { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PredictionKind::Classification { classes } => {
                if classes < 2 {
                    return Err(Error::invalid("classification needs at least 2 classes"));
                }
                for c in &self.cases {
                    let Target::Class(y) = c.target else {
                        return Err(Error::invalid(format!("case {} has a survival target", c.case_id)));
                    };
                    if y >= classes {
                        return Err(Error::invalid(format!("case {} label {y} out of range", c.case_id)));
                    }
                    if c.scores.len() != classes {
                        return Err(Error::DimMismatch { expected: classes, got: c.scores.len() });
                    }
                    if c.scores.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(Error::invalid(format!("case {} has a probability outside [0,1]", c.case_id)));
                    }
                    let sum: f64 = c.scores.iter().sum();
                    if (sum - 1.0).abs() > PROB_SUM_TOL {
                        return Err(Error::invalid(format!(
                            "case {} probabilities sum to {sum}",
                            c.case_id
                        )));
                    }
                }
            }
            PredictionKind::Survival { bins } => {
                for c in &self.cases {
                    if !matches!(c.target, Target::Survival(_)) {
                        return Err(Error::invalid(format!("case {} has a class target", c.case_id)));
                    }
                    if c.scores.len() != bins {
                        return Err(Error::DimMismatch { expected: bins, got: c.scores.len() });
                    }
                    if c.scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
                        return Err(Error::invalid(format!("case {} survival outside [0,1]", c.case_id)));
                    }
                    if c.scores.windows(2).any(|w| w[1] > w[0]) {
                        return Err(Error::invalid(format!("case {} survival increases across bins", c.case_id)));
                    }
                }
            }
        }
        Ok(())
    }

    /// New set made of the cases at `indices` (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            kind: self.kind,
            cases: indices.iter().map(|&i| self.cases[i].clone()).collect(),
        }
    }

    /// Class labels; panics on a survival set.
    pub fn labels(&self) -> Vec<usize> {
        self.cases
            .iter()
            .map(|c| match c.target {
                Target::Class(y) => y,
                Target::Survival(_) => panic!("labels() on a survival prediction set"),
            })
            .collect()
    }

    /// Column `class` of the probability matrix.
    pub fn class_scores(&self, class: usize) -> Vec<f64> {
        self.cases.iter().map(|c| c.scores[class]).collect()
    }

    pub fn survival_records(&self) -> Vec<SurvivalRecord> {
        self.cases
            .iter()
            .filter_map(|c| match c.target {
                Target::Survival(r) => Some(r),
                Target::Class(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::invalid(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, case_id: &str) -> Option<Split> {
        self.assignment.get(case_id).copied()
    }

    pub fn cases_in(&self, split: Split) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, s)| **s == split)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|s| **s == split).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.7, val: 0.1, test: 0.2 }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Label-stratified train/val/test assignment at the case level.
///
/// Within each stratum the cases are sorted by id and shuffled with a
/// stream seeded by `(seed, stratum index)`. Per-stratum counts are floors
/// of the exact quotas plus a controlled rounding that hits the overall
/// largest-remainder totals, so every stratum is within one case of its
/// quota for every split.
pub fn split_dataset(
    bags: &[FeatureBag],
    ratios: SplitRatios,
    seed: u64,
    stratify: bool,
) -> Result<SplitAssignment> {
    if bags.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let r = ratios.as_array();
    if r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios must be non-negative and sum to 1, got {r:?}")));
    }

    let mut strata: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for bag in bags {
        let label = bag
            .label
            .ok_or_else(|| Error::invalid(format!("bag {} has no label", bag.case_id)))?;
        let key = if stratify { label.stratum() } else { String::new() };
        strata.entry(key).or_default().push(&bag.case_id);
    }
    if stratify {
        for (class, ids) in &strata {
            if ids.len() < 3 {
                return Err(Error::ClassTooSmall { class: class.clone(), count: ids.len() });
            }
        }
    }

    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let counts = controlled_rounding(&sizes, &r);

    let mut assignment = BTreeMap::new();
    for (si, ((_, ids), row)) in strata.iter_mut().zip(&counts).enumerate() {
        ids.sort_unstable();
        CounterRng::new(seed, si as u64).shuffle(ids);
        let mut it = ids.iter();
        for (split, &n) in Split::ALL.iter().zip(row) {
            for id in it.by_ref().take(n) {
                if assignment.insert(id.to_string(), *split).is_some() {
                    return Err(Error::invalid(format!("duplicate case id {id}")));
                }
            }
        }
    }
    Ok(SplitAssignment { assignment })
}

/// Integer matrix with row sums `sizes`, each entry the floor or ceiling
/// of `sizes[i] * ratios[j]`, and column sums as close as possible to the
/// largest-remainder apportionment of the total.
fn controlled_rounding(sizes: &[usize], ratios: &[f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = sizes.iter().sum();
    let col_targets = largest_remainder(total, ratios);

    let mut out: Vec<[usize; 3]> = Vec::with_capacity(sizes.len());
    let mut frac: Vec<[f64; 3]> = Vec::with_capacity(sizes.len());
    let mut row_left: Vec<usize> = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut row = [0usize; 3];
        let mut fr = [0f64; 3];
        for j in 0..3 {
            let q = n as f64 * ratios[j];
            row[j] = (q + 1e-9).floor() as usize;
            fr[j] = (q - row[j] as f64).max(0.0);
            if fr[j] < 1e-9 {
                fr[j] = 0.0;
            }
        }
        row_left.push(n - row.iter().sum::<usize>());
        out.push(row);
        frac.push(fr);
    }
    let mut col_left = [0usize; 3];
    for j in 0..3 {
        let used: usize = out.iter().map(|r| r[j]).sum();
        col_left[j] = col_targets[j].saturating_sub(used);
    }

    // Unit-capacity transportation problem from rows with leftover cases to
    // columns with leftover demand, solved by augmenting paths. Edges exist
    // only where the quota is fractional.
    let rows = sizes.len();
    let mut bumped = vec![[false; 3]; rows];
    let mut order: Vec<(usize, usize)> = (0..rows)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .filter(|&(i, j)| frac[i][j] > 0.0)
        .collect();
    order.sort_by(|a, b| frac[b.0][b.1].total_cmp(&frac[a.0][a.1]).then(a.cmp(b)));

    for i in 0..rows {
        while row_left[i] > 0 {
            let mut seen_cols = [false; 3];
            if !augment(i, &frac, &mut bumped, &mut col_left, &mut seen_cols, &order) {
                break;
            }
            row_left[i] -= 1;
        }
    }
    // Whatever the column targets could not absorb goes to the largest
    // remaining fractional quota of its row.
    for i in 0..rows {
        while row_left[i] > 0 {
            let j = (0..3)
                .filter(|&j| !bumped[i][j] && frac[i][j] > 0.0)
                .max_by(|&a, &b| frac[i][a].total_cmp(&frac[i][b]).then(b.cmp(&a)))
                .unwrap_or(0);
            bumped[i][j] = true;
            row_left[i] -= 1;
        }
    }
    for i in 0..rows {
        for j in 0..3 {
            if bumped[i][j] {
                out[i][j] += 1;
            }
        }
    }
    out
}

fn augment(
    row: usize,
    frac: &[[f64; 3]],
    bumped: &mut [[bool; 3]],
    col_left: &mut [usize; 3],
    seen_cols: &mut [bool; 3],
    order: &[(usize, usize)],
) -> bool {
    let cols: Vec<usize> = order.iter().filter(|(i, _)| *i == row).map(|(_, j)| *j).collect();
    for &j in &cols {
        if bumped[row][j] || seen_cols[j] {
            continue;
        }
        seen_cols[j] = true;
        if col_left[j] > 0 {
            col_left[j] -= 1;
            bumped[row][j] = true;
            return true;
        }
        // Column full: move another row's unit out of it if that row can
        // be served elsewhere.
        for other in 0..frac.len() {
            if other != row && bumped[other][j] && augment(other, frac, bumped, col_left, seen_cols, order) {
                bumped[other][j] = false;
                bumped[row][j] = true;
                return true;
            }
        }
    }
    false
}

fn largest_remainder(total: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut rem = [(0f64, 0usize); 3];
    for j in 0..3 {
        let q = total as f64 * ratios[j];
        out[j] = (q + 1e-9).floor() as usize;
        rem[j] = (q - out[j] as f64, j);
    }
    let mut left = total - out.iter().sum::<usize>();
    rem.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, j) in &rem {
        if left == 0 {
            break;
        }
        out[j] += 1;
        left -= 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled_bags(class_counts: &[usize]) -> Vec<FeatureBag> {
        let mut bags = Vec::new();
        for (c, &n) in class_counts.iter().enumerate() {
            for i in 0..n {
                let bag = FeatureBag::new(format!("c{c}_{i:03}"), Array2::zeros((1, 2)))
                    .unwrap()
                    .with_label(Label::Class(c));
                bags.push(bag);
            }
        }
        bags
    }

    fn per_class(split: &SplitAssignment, bags: &[FeatureBag]) -> BTreeMap<(usize, Split), usize> {
        let mut m = BTreeMap::new();
        for b in bags {
            let c = b.label.unwrap().class().unwrap();
            *m.entry((c, split.get(&b.case_id).unwrap())).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn ten_cases_split_7_1_2() {
        let bags = labelled_bags(&[5, 5]);
        let s = split_dataset(&bags, SplitRatios::default(), 1, true).unwrap();
        assert_eq!(s.count(Split::Train), 7);
        assert_eq!(s.count(Split::Val), 1);
        assert_eq!(s.count(Split::Test), 2);
        let m = per_class(&s, &bags);
        for c in 0..2 {
            assert_eq!(m.get(&(c, Split::Test)).copied().unwrap_or(0), 1);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let bags = labelled_bags(&[5, 5]);
        let a = split_dataset(&bags, SplitRatios::default(), 1, true).unwrap();
        let b = split_dataset(&bags, SplitRatios::default(), 1, true).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&bags, SplitRatios::default(), 2, true).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn hundred_cases_sixty_forty() {
        let bags = labelled_bags(&[60, 40]);
        let s = split_dataset(&bags, SplitRatios::default(), 11, true).unwrap();
        let m = per_class(&s, &bags);
        let t0 = m[&(0, Split::Test)] as i64;
        let t1 = m[&(1, Split::Test)] as i64;
        assert!((t0 - 12).abs() <= 1 && (t1 - 8).abs() <= 1, "{t0} {t1}");
        assert_eq!(s.assignment.len(), 100);
    }

    #[test]
    fn stratification_within_one_case_for_awkward_counts() {
        for counts in [vec![3, 4, 5], vec![7, 11, 13, 17], vec![9, 9, 9], vec![3, 3, 3, 3, 3]] {
            let bags = labelled_bags(&counts);
            let s = split_dataset(&bags, SplitRatios::default(), 3, true).unwrap();
            let m = per_class(&s, &bags);
            for (c, &n) in counts.iter().enumerate() {
                for (split, r) in Split::ALL.iter().zip([0.7, 0.1, 0.2]) {
                    let got = m.get(&(c, *split)).copied().unwrap_or(0) as f64;
                    assert!((got - r * n as f64).abs() <= 1.0, "{counts:?} class {c} {split}: {got}");
                }
            }
        }
    }

    #[test]
    fn small_class_is_named() {
        let bags = labelled_bags(&[5, 2]);
        match split_dataset(&bags, SplitRatios::default(), 1, true) {
            Err(Error::ClassTooSmall { class, count }) => {
                assert_eq!(class, "1");
                assert_eq!(count, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        // Without stratification two cases are fine.
        split_dataset(&bags, SplitRatios::default(), 1, false).unwrap();
    }

    #[test]
    fn empty_and_unlabelled_rejected() {
        assert!(split_dataset(&[], SplitRatios::default(), 1, true).is_err());
        let bag = FeatureBag::new("x", Array2::zeros((1, 1))).unwrap();
        assert!(split_dataset(&[bag], SplitRatios::default(), 1, false).is_err());
    }

    #[test]
    fn task_kind_parsing() {
        assert_eq!("binary".parse::<TaskKind>().unwrap(), TaskKind::Binary);
        assert_eq!("multiclass:3".parse::<TaskKind>().unwrap(), TaskKind::Multiclass { classes: 3 });
        assert_eq!("survival".parse::<TaskKind>().unwrap(), TaskKind::Survival { bins: 4 });
        assert!("multiclass:2".parse::<TaskKind>().is_err());
        assert!("survival:1".parse::<TaskKind>().is_err());
        assert!("ordinal".parse::<TaskKind>().is_err());
    }

    #[test]
    fn bag_invariants() {
        assert!(FeatureBag::new("a", Array2::zeros((0, 4))).is_err());
        let mut f = Array2::zeros((2, 2));
        f[[1, 1]] = f32::NAN;
        assert!(FeatureBag::new("a", f).is_err());
        let bag = FeatureBag::new("a", Array2::zeros((2, 2))).unwrap();
        assert!(bag.with_coords(vec![PatchCoord { slide: 0, x: 0, y: 0, patch_size: 256 }]).is_err());
    }

    #[test]
    fn prediction_set_invariants() {
        let bad = PredictionSet::classification(
            3,
            vec![CasePrediction { case_id: "a".into(), target: Target::Class(0), scores: vec![0.5, 0.4, 0.2] }],
        );
        assert!(bad.is_err());
        let bad = PredictionSet::survival(
            2,
            vec![CasePrediction {
                case_id: "a".into(),
                target: Target::Survival(SurvivalRecord { time: 1.0, event: true }),
                scores: vec![0.5, 0.6],
            }],
        );
        assert!(bad.is_err());
        assert!(SurvivalRecord::new(0.0, true).is_err());
    }
}
