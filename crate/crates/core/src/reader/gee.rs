use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{Condition, Experience, ReaderObservation};
use crate::error::{Error, Result};

const Z95: f64 = 1.96;
const MU_EPS: f64 = 1e-10;
const ALPHA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Logit link.
    Binomial,
    /// Identity link.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingCorrelation {
    Independence,
    Exchangeable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeeOptions {
    pub family: Family,
    pub working: WorkingCorrelation,
    pub tol: f64,
    pub max_iter: usize,
    /// Coefficients beyond this magnitude signal separation.
    pub beta_bound: f64,
}

impl GeeOptions {
    pub fn new(family: Family) -> Self {
        Self { family, working: WorkingCorrelation::Exchangeable, tol: 1e-8, max_iter: 100, beta_bound: 30.0 }
    }

    pub fn independence(mut self) -> Self {
        self.working = WorkingCorrelation::Independence;
        self
    }
}

/// Outcome, design matrix and cluster labels for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub clusters: Vec<String>,
}

impl Design {
    pub fn new(y: Vec<f64>, x: DMatrix<f64>, names: Vec<String>, clusters: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimMismatch { expected: y.len(), got: x.nrows() });
        }
        if clusters.len() != y.len() {
            return Err(Error::DimMismatch { expected: y.len(), got: clusters.len() });
        }
        if names.len() != x.ncols() {
            return Err(Error::DimMismatch { expected: x.ncols(), got: names.len() });
        }
        Ok(Self { y, x, names, clusters })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// The same design with one column removed.
    pub fn without(&self, name: &str) -> Result<Self> {
        let j = self.column(name).ok_or_else(|| Error::invalid(format!("no column {name}")))?;
        let mut names = self.names.clone();
        names.remove(j);
        Ok(Self { y: self.y.clone(), x: self.x.clone().remove_column(j), names, clusters: self.clusters.clone() })
    }

    /// Keeps the rows where `keep` is true.
    pub fn filter_rows(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.y.len() {
            return Err(Error::DimMismatch { expected: self.y.len(), got: keep.len() });
        }
        let rows: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        Ok(Self {
            y: rows.iter().map(|&i| self.y[i]).collect(),
            x: self.x.select_rows(rows.iter()),
            names: self.names.clone(),
            clusters: rows.iter().map(|&i| self.clusters[i].clone()).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// exp(β): an odds ratio under the logit link, a ratio of geometric
    /// means for a log-scale Gaussian outcome.
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeeFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub robust_se: Vec<f64>,
    pub alpha: f64,
    pub phi: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest coefficient change in the final iteration.
    pub last_update: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
}

impl GeeFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.coefficients[j])
    }

    pub fn effect(&self, name: &str) -> Option<Effect> {
        let j = self.names.iter().position(|n| n == name)?;
        let (beta, se) = (self.coefficients[j], self.robust_se[j]);
        let (lo, hi) = (beta - Z95 * se, beta + Z95 * se);
        let p_value = if se > 0.0 { erfc((beta / se).abs() / std::f64::consts::SQRT_2) } else if beta == 0.0 { 1.0 } else { 0.0 };
        Some(Effect {
            name: name.to_string(),
            beta,
            se,
            beta_lo: lo,
            beta_hi: hi,
            ratio: beta.exp(),
            ratio_lo: lo.exp(),
            ratio_hi: hi.exp(),
            p_value,
        })
    }

    pub fn effects(&self) -> Vec<Effect> {
        self.names.iter().filter_map(|n| self.effect(n)).collect()
    }
}

/// Row indices grouped by cluster label, in order of first appearance.
fn group_clusters(labels: &[String]) -> Vec<Vec<usize>> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let g = *slot.entry(l.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Applies the inverse exchangeable correlation matrix of size `n` to the
/// rows of `m`.
fn apply_rinv(m: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    if alpha == 0.0 {
        return m.clone();
    }
    let n = m.nrows() as f64;
    let c = alpha / (1.0 + (n - 1.0) * alpha);
    let sums = m.row_sum();
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= &sums * c;
    }
    out / (1.0 - alpha)
}

struct Moments {
    /// √v ⊙ x per row.
    xt: DMatrix<f64>,
    /// Pearson residuals.
    e: DVector<f64>,
}

fn moments(design: &Design, beta: &DVector<f64>, family: Family) -> Moments {
    let eta = &design.x * beta;
    let mut xt = design.x.clone();
    let mut e = DVector::zeros(design.y.len());
    for i in 0..design.y.len() {
        let (mu, v) = match family {
            Family::Binomial => {
                let mu = (1.0 / (1.0 + (-eta[i]).exp())).clamp(MU_EPS, 1.0 - MU_EPS);
                (mu, mu * (1.0 - mu))
            }
            Family::Gaussian => (eta[i], 1.0),
        };
        let s = v.sqrt();
        xt.row_mut(i).scale_mut(s);
        e[i] = (design.y[i] - mu) / s;
    }
    Moments { xt, e }
}

fn dispersion(e: &DVector<f64>, p: usize) -> f64 {
    e.norm_squared() / (e.len() - p) as f64
}

fn exchangeable_alpha(e: &DVector<f64>, groups: &[Vec<usize>], phi: f64) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    let mut n_max = 1;
    for g in groups {
        let s: f64 = g.iter().map(|&i| e[i]).sum();
        let ss: f64 = g.iter().map(|&i| e[i] * e[i]).sum();
        num += (s * s - ss) / 2.0;
        pairs += (g.len() * (g.len() - 1)) as f64 / 2.0;
        n_max = n_max.max(g.len());
    }
    if pairs == 0.0 || phi <= 0.0 {
        return 0.0;
    }
    let lo = -1.0 / (n_max - 1) as f64 + ALPHA_MARGIN;
    (num / pairs / phi).clamp(lo, 1.0 - ALPHA_MARGIN)
}

fn cluster_blocks(m: &Moments, groups: &[Vec<usize>]) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    groups.iter().map(|g| (m.xt.select_rows(g.iter()), DVector::from_iterator(g.len(), g.iter().map(|&i| m.e[i])))).collect()
}

/// Fits a marginal model by generalized estimating equations with a
/// sandwich (cluster-robust) covariance.
pub fn gee_fit(design: &Design, opts: &GeeOptions) -> Result<GeeFit> {
    let (n, p) = (design.x.nrows(), design.x.ncols());
    if p == 0 || n <= p {
        return Err(Error::invalid(format!("{n} observations cannot support {p} coefficients")));
    }
    if design.y.iter().chain(design.x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GEE input".into()));
    }
    if opts.family == Family::Binomial {
        if design.y.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::invalid("binomial outcome must be 0 or 1"));
        }
        let s: f64 = design.y.iter().sum();
        if s == 0.0 || s == n as f64 {
            return Err(Error::Separation("outcome is constant".into()));
        }
    }
    let groups = group_clusters(&design.clusters);
    if groups.len() < 2 {
        return Err(Error::invalid("GEE needs at least two clusters"));
    }
    if (design.x.transpose() * &design.x).cholesky().is_none() {
        return Err(Error::invalid("design matrix is not full rank"));
    }
    let exchangeable = opts.working == WorkingCorrelation::Exchangeable;

    let mut beta = DVector::zeros(p);
    let mut alpha = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_update = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        let m = moments(design, &beta, opts.family);
        if exchangeable && iterations > 1 {
            alpha = exchangeable_alpha(&m.e, &groups, dispersion(&m.e, p));
        }
        let mut info = DMatrix::zeros(p, p);
        let mut score = DVector::zeros(p);
        for (xt, e) in cluster_blocks(&m, &groups) {
            let rx = apply_rinv(&xt, alpha);
            info += xt.transpose() * &rx;
            score += rx.transpose() * e;
        }
        let step = info.cholesky().ok_or_else(|| Error::invalid("working information matrix is singular"))?.solve(&score);
        beta += &step;
        last_update = step.amax();
        if let Some(b) = beta.iter().find(|b| !b.is_finite() || b.abs() > opts.beta_bound) {
            return Err(Error::Separation(format!("coefficient reached {b:.3e}")));
        }
        if last_update < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence { iterations });
    }

    let m = moments(design, &beta, opts.family);
    let phi = dispersion(&m.e, p);
    if exchangeable {
        alpha = exchangeable_alpha(&m.e, &groups, phi);
    }
    let mut bread = DMatrix::zeros(p, p);
    let mut meat = DMatrix::zeros(p, p);
    for (xt, e) in cluster_blocks(&m, &groups) {
        let rx = apply_rinv(&xt, alpha);
        bread += xt.transpose() * &rx;
        let u = rx.transpose() * e;
        meat += &u * u.transpose();
    }
    let bread_inv = bread.cholesky().ok_or_else(|| Error::invalid("working information matrix is singular"))?.inverse();
    let cov = &bread_inv * meat * &bread_inv;
    Ok(GeeFit {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        robust_se: (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        alpha,
        phi,
        iterations,
        converged,
        last_update,
        n_obs: n,
        n_clusters: groups.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RctOutcome {
    /// Diagnosis equals truth; binomial.
    Accuracy,
    /// log(time_sec); Gaussian.
    LogTime,
    /// Confidence score; Gaussian.
    Confidence,
}

impl RctOutcome {
    pub fn family(self) -> Family {
        match self {
            RctOutcome::Accuracy => Family::Binomial,
            _ => Family::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterUnit {
    PathologistCase,
    Pathologist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub outcome: RctOutcome,
    pub cluster: ClusterUnit,
    pub task_effects: bool,
    pub ai_x_period: bool,
    pub ai_x_experience: bool,
}

impl DesignOptions {
    pub fn new(outcome: RctOutcome, cluster: ClusterUnit) -> Self {
        Self { outcome, cluster, task_effects: true, ai_x_period: false, ai_x_experience: false }
    }
}

pub const COL_INTERCEPT: &str = "intercept";
pub const COL_AI: &str = "ai";
pub const COL_PERIOD: &str = "period2";
pub const COL_SENIOR: &str = "senior";
pub const COL_AI_PERIOD: &str = "ai:period2";
pub const COL_AI_SENIOR: &str = "ai:senior";

type ColumnFn = Box<dyn Fn(&ReaderObservation) -> f64>;

/// Builds `intercept + ai + period2 + senior + task dummies` with optional
/// interactions. Columns with no variation in `obs` are left out, task
/// dummies use the alphabetically first task as reference.
pub fn rct_design(obs: &[ReaderObservation], opts: &DesignOptions) -> Result<Design> {
    if obs.is_empty() {
        return Err(Error::invalid("no reader observations"));
    }
    let ai = |o: &ReaderObservation| (o.condition == Condition::Assisted) as u8 as f64;
    let period = |o: &ReaderObservation| (o.period == 2) as u8 as f64;
    let senior = |o: &ReaderObservation| (o.experience == Experience::Senior) as u8 as f64;
    let varies = |f: &dyn Fn(&ReaderObservation) -> f64| obs.iter().any(|o| f(o) != f(&obs[0]));

    let mut cols: Vec<(String, ColumnFn)> = vec![(COL_INTERCEPT.into(), Box::new(|_| 1.0))];
    if !varies(&ai) {
        return Err(Error::invalid("both conditions are needed"));
    }
    cols.push((COL_AI.into(), Box::new(ai)));
    let has_period = varies(&period);
    let has_senior = varies(&senior);
    if has_period {
        cols.push((COL_PERIOD.into(), Box::new(period)));
    }
    if has_senior {
        cols.push((COL_SENIOR.into(), Box::new(senior)));
    }
    if opts.task_effects {
        let tasks: BTreeSet<&str> = obs.iter().map(|o| o.task.as_str()).collect();
        for t in tasks.into_iter().skip(1) {
            let t = t.to_string();
            cols.push((format!("task[{t}]"), Box::new(move |o: &ReaderObservation| (o.task == t) as u8 as f64)));
        }
    }
    if opts.ai_x_period && has_period {
        cols.push((COL_AI_PERIOD.into(), Box::new(move |o| ai(o) * period(o))));
    }
    if opts.ai_x_experience && has_senior {
        cols.push((COL_AI_SENIOR.into(), Box::new(move |o| ai(o) * senior(o))));
    }

    let x = DMatrix::from_fn(obs.len(), cols.len(), |i, j| (cols[j].1)(&obs[i]));
    let y = obs
        .iter()
        .map(|o| match opts.outcome {
            RctOutcome::Accuracy => o.correct() as u8 as f64,
            RctOutcome::LogTime => o.time_sec.ln(),
            RctOutcome::Confidence => o.confidence,
        })
        .collect();
    let clusters = obs
        .iter()
        .map(|o| match opts.cluster {
            ClusterUnit::PathologistCase => format!("{}\u{1f}{}\u{1f}{}", o.reader_id, o.task, o.case_id),
            ClusterUnit::Pathologist => o.reader_id.clone(),
        })
        .collect();
    Design::new(y, x, cols.into_iter().map(|c| c.0).collect(), clusters)
}
