//! Risk scores, concordance, Kaplan-Meier curves and the log-rank test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::{PredictionSet, SurvivalRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub case_id: String,
    pub r: f64,
}

/// `r = -sum_m S_m`: lower predicted survival means higher risk.
pub fn risk_score(survival: &[f64]) -> f64 {
    -survival.iter().sum::<f64>()
}

pub fn risk_scores(pred: &PredictionSet) -> Result<Vec<RiskScore>> {
    if pred.n_classes().is_some() {
        return Err(Error::invalid("risk scores need a survival prediction set"));
    }
    Ok(pred.cases.iter().map(|c| RiskScore { case_id: c.case_id.clone(), r: risk_score(&c.scores) }).collect())
}

/// Fenwick tree over risk ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< i`.
    fn below(&self, i: usize) -> u64 {
        let mut i = i;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Harrell's C over pairs `T_i < T_j` with `δ_i = 1`: concordant when
/// `r_i > r_j`, half credit for equal risks. Pairs with equal times are
/// not comparable. O(n log n).
pub fn c_index(risks: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    if risks.len() != records.len() {
        return Err(Error::DimMismatch { expected: records.len(), got: risks.len() });
    }
    if risks.iter().any(|r| r.is_nan()) {
        return Err(Error::NonFinite("NaN risk".into()));
    }
    let n = risks.len();
    let mut sorted: Vec<f64> = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank = |r: f64| sorted.partition_point(|&v| v < r);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));
    let mut tree = Fenwick(vec![0; sorted.len() + 1]);
    let (mut twice_concordant, mut pairs, mut inserted) = (0u128, 0u128, 0u64);
    let mut i = 0;
    while i < n {
        let t = records[order[i]].time;
        let mut j = i;
        while j < n && records[order[j]].time == t {
            j += 1;
        }
        // tree holds exactly the cases with time > t
        for &k in &order[i..j] {
            if records[k].event {
                let rk = rank(risks[k]);
                let less = tree.below(rk);
                let equal = tree.below(rk + 1) - less;
                twice_concordant += 2 * less as u128 + equal as u128;
                pairs += inserted as u128;
            }
        }
        for &k in &order[i..j] {
            tree.add(rank(risks[k]));
            inserted += 1;
        }
        i = j;
    }
    if pairs == 0 {
        return Err(Error::undefined("no comparable pairs"));
    }
    Ok(twice_concordant as f64 / (2 * pairs) as f64)
}

/// C-index of a survival prediction set, using `risk_score` per case.
pub fn c_index_of(pred: &PredictionSet) -> Result<f64> {
    let risks: Vec<f64> = risk_scores(pred)?.into_iter().map(|r| r.r).collect();
    c_index(&risks, &pred.survival_records())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskGroup {
    Low,
    High,
}

/// `r > median` is High; the median is the lower middle value for even n.
pub fn median_split(risks: &[f64]) -> Result<Vec<RiskGroup>> {
    if risks.len() < 2 {
        return Err(Error::invalid("median split needs at least two cases"));
    }
    if risks.iter().any(|r| r.is_nan()) {
        return Err(Error::NonFinite("NaN risk".into()));
    }
    let mut sorted = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(sorted.len() - 1) / 2];
    Ok(risks.iter().map(|&r| if r > median { RiskGroup::High } else { RiskGroup::Low }).collect())
}

/// Product-limit estimate at each distinct event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMCurve {
    pub times: Vec<f64>,
    /// S(t) just after each time.
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl KMCurve {
    /// Right-continuous step value; 1 before the first event.
    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&e| e <= t);
        if k == 0 { 1.0 } else { self.survival[k - 1] }
    }
}

/// Cases censored at an event time are still at risk at that time.
pub fn km_estimate(records: &[SurvivalRecord]) -> Result<KMCurve> {
    if records.is_empty() {
        return Err(Error::invalid("Kaplan-Meier needs at least one case"));
    }
    let mut event_times: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut curve = KMCurve { times: Vec::new(), survival: Vec::new(), at_risk: Vec::new(), events: Vec::new() };
    let mut s = 1.0;
    for t in event_times {
        let n = records.iter().filter(|r| r.time >= t).count();
        let d = records.iter().filter(|r| r.event && r.time == t).count();
        s *= 1.0 - d as f64 / n as f64;
        curve.times.push(t);
        curve.survival.push(s);
        curve.at_risk.push(n);
        curve.events.push(d);
    }
    Ok(curve)
}

/// Number of cases with follow-up `>= t`, for at-risk tables.
pub fn at_risk(records: &[SurvivalRecord], t: f64) -> usize {
    records.iter().filter(|r| r.time >= t).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRank {
    pub statistic: f64,
    pub p_value: f64,
    pub observed_a: f64,
    pub expected_a: f64,
}

/// Two-group log-rank test with hypergeometric variance; p from the
/// 1-df chi-square upper tail.
pub fn logrank(a: &[SurvivalRecord], b: &[SurvivalRecord]) -> Result<LogRank> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("log-rank needs two non-empty groups"));
    }
    let mut times: Vec<f64> = a.iter().chain(b).filter(|r| r.event).map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (mut o_minus_e, mut var, mut observed, mut expected) = (0.0, 0.0, 0.0, 0.0);
    for t in times {
        let na = at_risk(a, t) as f64;
        let n = na + at_risk(b, t) as f64;
        let da = a.iter().filter(|r| r.event && r.time == t).count() as f64;
        let d = da + b.iter().filter(|r| r.event && r.time == t).count() as f64;
        o_minus_e += (da * n - d * na) / n;
        observed += da;
        expected += d * na / n;
        if n > 1.0 {
            var += d * (na / n) * (1.0 - na / n) * (n - d) / (n - 1.0);
        }
    }
    if var <= 0.0 {
        return Err(Error::undefined("log-rank variance is zero"));
    }
    let statistic = o_minus_e * o_minus_e / var;
    Ok(LogRank { statistic, p_value: chi2_1df_upper(statistic), observed_a: observed, expected_a: expected })
}

/// `P(X > x)` for X ~ chi-square(1).
pub fn chi2_1df_upper(x: f64) -> f64 {
    if x <= 0.0 { 1.0 } else { erfc((x / 2.0).sqrt()) }
}
