//! Crossover reader-study statistics.

mod gee;
mod kappa;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::survival::chi2_1df_upper;

pub use gee::{gee_fit, rct_design, ClusterUnit, Design, DesignOptions, Effect, Family, GeeFit, GeeOptions, RctOutcome, WorkingCorrelation};
pub use kappa::{fleiss_kappa, kappa_band, kappa_inference, rating_profiles, KappaEstimate, KappaInference, RatingProfiles};
pub use report::{rct_report, RctReport};

macro_rules! text_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::invalid(format!(concat!("bad ", stringify!($name), " {:?}"), other))),
                }
            }
        }
    };
}

text_enum!(Experience { Junior => "junior", Senior => "senior" });
text_enum!(Sequence { A => "A", B => "B" });
text_enum!(Condition { Assisted => "assisted", Unassisted => "unassisted" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderObservation {
    pub reader_id: String,
    pub experience: Experience,
    pub sequence: Sequence,
    /// 1 or 2.
    pub period: u8,
    pub condition: Condition,
    pub task: String,
    pub case_id: String,
    pub diagnosis: String,
    pub truth: String,
    /// Required for assisted reads.
    pub model_prediction: Option<String>,
    pub time_sec: f64,
    pub confidence: f64,
}

impl ReaderObservation {
    pub fn correct(&self) -> bool {
        self.diagnosis == self.truth
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = || format!("reader {} case {}", self.reader_id, self.case_id);
        if self.period != 1 && self.period != 2 {
            return Err(Error::invalid(format!("{}: period must be 1 or 2", ctx())));
        }
        if self.condition == Condition::Assisted && self.model_prediction.as_deref().is_none_or(str::is_empty) {
            return Err(Error::invalid(format!("{}: assisted read without a model prediction", ctx())));
        }
        if !(self.time_sec.is_finite() && self.time_sec > 0.0) {
            return Err(Error::invalid(format!("{}: time_sec must be positive", ctx())));
        }
        if !(1.0..=10.0).contains(&self.confidence) {
            return Err(Error::invalid(format!("{}: confidence outside [1, 10]", ctx())));
        }
        Ok(())
    }
}

pub const READERS_HEADER: [&str; 12] = [
    "reader_id",
    "experience",
    "sequence",
    "period",
    "condition",
    "task",
    "case_id",
    "diagnosis",
    "truth",
    "model_prediction",
    "time_sec",
    "confidence",
];

pub fn read_readers<R: Read>(input: R) -> Result<Vec<ReaderObservation>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != READERS_HEADER {
        return Err(Error::invalid(format!("readers.csv header must be {}", READERS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let mut obs: ReaderObservation = row?;
        if obs.model_prediction.as_deref() == Some("") {
            obs.model_prediction = None;
        }
        obs.validate()?;
        out.push(obs);
    }
    Ok(out)
}

pub fn read_readers_file(path: impl AsRef<Path>) -> Result<Vec<ReaderObservation>> {
    read_readers(std::fs::File::open(path)?)
}

pub fn write_readers<W: Write>(obs: &[ReaderObservation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for o in obs {
        w.serialize(o)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub correct: usize,
    pub total: usize,
}

impl AccuracyCell {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    /// `None` pools over readers.
    pub reader_id: Option<String>,
    /// `None` pools over tasks.
    pub task: Option<String>,
    pub unassisted: AccuracyCell,
    pub assisted: AccuracyCell,
    /// Assisted minus unassisted accuracy, in percentage points.
    pub delta_points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub rows: Vec<AccuracyRow>,
    /// Strata left out because one condition had no reads.
    pub notes: Vec<String>,
}

impl AccuracySummary {
    pub fn row(&self, reader_id: Option<&str>, task: Option<&str>) -> Option<&AccuracyRow> {
        self.rows.iter().find(|r| r.reader_id.as_deref() == reader_id && r.task.as_deref() == task)
    }
}

/// Accuracy by condition overall, per task, per reader and per
/// reader-task pair.
pub fn accuracy_summary(obs: &[ReaderObservation]) -> AccuracySummary {
    type Key = (Option<String>, Option<String>);
    let mut cells: BTreeMap<Key, [AccuracyCell; 2]> = BTreeMap::new();
    for o in obs {
        let slot = (o.condition == Condition::Assisted) as usize;
        let keys = [
            (None, None),
            (None, Some(o.task.clone())),
            (Some(o.reader_id.clone()), None),
            (Some(o.reader_id.clone()), Some(o.task.clone())),
        ];
        for k in keys {
            let c = &mut cells.entry(k).or_default()[slot];
            c.total += 1;
            c.correct += o.correct() as usize;
        }
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for ((reader_id, task), [un, aid]) in cells {
        match (un.accuracy(), aid.accuracy()) {
            (Some(u), Some(a)) => {
                rows.push(AccuracyRow { reader_id, task, unassisted: un, assisted: aid, delta_points: 100.0 * (a - u) })
            }
            _ => notes.push(format!(
                "omitted reader={} task={}: a condition has no reads",
                reader_id.as_deref().unwrap_or("all"),
                task.as_deref().unwrap_or("all")
            )),
        }
    }
    AccuracySummary { rows, notes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    /// Unassisted wrong, model right, assisted wrong.
    MissedOpportunity,
    /// Unassisted right, assisted wrong. `strict_harm` when the model was
    /// wrong and the assisted diagnosis equals its prediction.
    AccuracyLoss { strict_harm: bool },
    /// Unassisted, model and assisted all wrong.
    BothFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    /// Unassisted wrong, assisted right.
    Improved,
    /// Model, unassisted and assisted all right.
    Confirmed,
    /// Model wrong, unassisted and assisted right.
    Resilient,
    Failed(Failure),
}

pub fn classify_pair(unassisted: &ReaderObservation, assisted: &ReaderObservation) -> Result<OutcomeClass> {
    let pred = assisted
        .model_prediction
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("assisted read of case {} lacks a model prediction", assisted.case_id)))?;
    let model_right = pred == assisted.truth;
    Ok(match (unassisted.correct(), assisted.correct()) {
        (false, true) => OutcomeClass::Improved,
        (true, true) if model_right => OutcomeClass::Confirmed,
        (true, true) => OutcomeClass::Resilient,
        (true, false) => OutcomeClass::Failed(Failure::AccuracyLoss {
            strict_harm: !model_right && assisted.diagnosis == pred,
        }),
        (false, false) if model_right => OutcomeClass::Failed(Failure::MissedOpportunity),
        (false, false) => OutcomeClass::Failed(Failure::BothFailed),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub pairs: usize,
    pub improved: usize,
    pub confirmed: usize,
    pub resilient: usize,
    pub failed: usize,
    pub missed_opportunity: usize,
    pub accuracy_loss: usize,
    pub strict_harm: usize,
    pub both_failed: usize,
}

impl OutcomeCounts {
    pub fn add(&mut self, c: OutcomeClass) {
        self.pairs += 1;
        match c {
            OutcomeClass::Improved => self.improved += 1,
            OutcomeClass::Confirmed => self.confirmed += 1,
            OutcomeClass::Resilient => self.resilient += 1,
            OutcomeClass::Failed(f) => {
                self.failed += 1;
                match f {
                    Failure::MissedOpportunity => self.missed_opportunity += 1,
                    Failure::AccuracyLoss { strict_harm } => {
                        self.accuracy_loss += 1;
                        self.strict_harm += strict_harm as usize;
                    }
                    Failure::BothFailed => self.both_failed += 1,
                }
            }
        }
    }

    pub fn percent(&self, count: usize) -> f64 {
        if self.pairs == 0 { 0.0 } else { 100.0 * count as f64 / self.pairs as f64 }
    }
}

/// Pairs the two reads of every (reader, task, case) and classifies them.
pub fn classify_outcomes(obs: &[ReaderObservation]) -> Result<OutcomeCounts> {
    let mut pairs: BTreeMap<(&str, &str, &str), [Option<&ReaderObservation>; 2]> = BTreeMap::new();
    for o in obs {
        let slot = &mut pairs.entry((&o.reader_id, &o.task, &o.case_id)).or_default()[(o.condition == Condition::Assisted) as usize];
        if slot.is_some() {
            return Err(Error::invalid(format!("duplicate {} read of case {} by {}", o.condition, o.case_id, o.reader_id)));
        }
        *slot = Some(o);
    }
    let mut counts = OutcomeCounts::default();
    for ((reader, _, case), pair) in pairs {
        match pair {
            [Some(u), Some(a)] => counts.add(classify_pair(u, a)?),
            _ => return Err(Error::invalid(format!("case {case} by {reader} lacks one of its two reads"))),
        }
    }
    Ok(counts)
}

/// Exact two-sided binomial test of `b` against Binomial(b + c, 1/2).
pub fn mcnemar(b: usize, c: usize) -> Result<f64> {
    let n = b + c;
    if n == 0 {
        return Err(Error::invalid("McNemar needs at least one discordant pair"));
    }
    let k = b.min(c) as u64;
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let tail: f64 = (0..=k).map(|i| (ln_binomial(n as u64, i) - ln_half_n).exp()).sum();
    Ok((2.0 * tail).min(1.0))
}

/// Chi-square McNemar, optionally with the continuity correction.
pub fn mcnemar_chi2(b: usize, c: usize, continuity: bool) -> Result<f64> {
    let n = (b + c) as f64;
    if n == 0.0 {
        return Err(Error::invalid("McNemar needs at least one discordant pair"));
    }
    let diff = (b as f64 - c as f64).abs() - if continuity { 1.0 } else { 0.0 };
    Ok(chi2_1df_upper(diff.max(0.0).powi(2) / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl GroupSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("need at least two values for a standard deviation"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self { mean, sd: var.sqrt(), n: values.len() })
    }
}

/// `(mean_b - mean_a) / pooled_sd`.
pub fn cohens_d(a: GroupSummary, b: GroupSummary) -> Result<f64> {
    if a.n + b.n < 3 {
        return Err(Error::invalid("too few observations for a pooled standard deviation"));
    }
    let pooled = (((a.n - 1) as f64 * a.sd * a.sd + (b.n - 1) as f64 * b.sd * b.sd) / (a.n + b.n - 2) as f64).sqrt();
    if pooled.is_nan() || pooled <= 0.0 {
        return Err(Error::undefined("pooled standard deviation is zero"));
    }
    Ok((b.mean - a.mean) / pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn obs(reader: &str, case: &str, cond: Condition, dx: &str, truth: &str, model: Option<&str>) -> ReaderObservation {
        ReaderObservation {
            reader_id: reader.into(),
            experience: Experience::Junior,
            sequence: Sequence::A,
            period: if cond == Condition::Assisted { 1 } else { 2 },
            condition: cond,
            task: "t".into(),
            case_id: case.into(),
            diagnosis: dx.into(),
            truth: truth.into(),
            model_prediction: model.map(str::to_string),
            time_sec: 60.0,
            confidence: 7.0,
        }
    }

    fn pair(un: &str, model: &str, aid: &str) -> OutcomeClass {
        let u = obs("r", "c", Condition::Unassisted, un, "x", None);
        let a = obs("r", "c", Condition::Assisted, aid, "x", Some(model));
        classify_pair(&u, &a).unwrap()
    }

    #[test]
    fn outcome_definitions() {
        assert_eq!(pair("y", "x", "x"), OutcomeClass::Improved);
        assert_eq!(pair("x", "y", "y"), OutcomeClass::Failed(Failure::AccuracyLoss { strict_harm: true }));
        assert_eq!(pair("x", "y", "x"), OutcomeClass::Resilient);
        assert_eq!(pair("x", "x", "x"), OutcomeClass::Confirmed);
        assert_eq!(pair("x", "y", "z"), OutcomeClass::Failed(Failure::AccuracyLoss { strict_harm: false }));
        assert_eq!(pair("x", "x", "z"), OutcomeClass::Failed(Failure::AccuracyLoss { strict_harm: false }));
        assert_eq!(pair("y", "x", "y"), OutcomeClass::Failed(Failure::MissedOpportunity));
        assert_eq!(pair("y", "z", "y"), OutcomeClass::Failed(Failure::BothFailed));
    }

    #[test]
    fn assisted_read_needs_model_prediction() {
        let u = obs("r", "c", Condition::Unassisted, "x", "x", None);
        let a = obs("r", "c", Condition::Assisted, "x", "x", None);
        assert!(classify_pair(&u, &a).is_err());
        assert!(a.validate().is_err());
    }

    #[test]
    fn incomplete_pairs_are_rejected() {
        let only = vec![obs("r", "c", Condition::Unassisted, "x", "x", None)];
        assert!(classify_outcomes(&only).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let mut all = Vec::new();
        for i in 0..5 {
            all.push(obs("r", &format!("c{i}"), Condition::Unassisted, "x", "x", None));
            all.push(obs("r", &format!("c{i}"), Condition::Assisted, "x", "x", Some("x")));
        }
        let s = accuracy_summary(&all);
        assert!(s.rows.iter().all(|r| r.unassisted.accuracy() == Some(1.0) && r.delta_points == 0.0));

        let mut built = Vec::new();
        for i in 0..1000 {
            let id = format!("c{i}");
            built.push(obs("r", &id, Condition::Unassisted, if i < 838 { "x" } else { "y" }, "x", None));
            built.push(obs("r", &id, Condition::Assisted, if i < 917 { "x" } else { "y" }, "x", Some("x")));
        }
        let s = accuracy_summary(&built);
        assert!((s.row(None, None).unwrap().delta_points - 7.9).abs() < 1e-9);

        let one = vec![
            obs("r", "c", Condition::Unassisted, "y", "x", None),
            obs("r", "c", Condition::Assisted, "x", "x", Some("x")),
        ];
        assert!((accuracy_summary(&one).row(Some("r"), Some("t")).unwrap().delta_points - 100.0).abs() < 1e-12);
    }

    #[test]
    fn empty_stratum_is_noted() {
        let mut o = vec![obs("r1", "c", Condition::Unassisted, "x", "x", None), obs("r1", "c", Condition::Assisted, "x", "x", Some("x"))];
        o.push(obs("r2", "c", Condition::Unassisted, "x", "x", None));
        let s = accuracy_summary(&o);
        assert!(s.row(Some("r2"), None).is_none());
        assert!(!s.notes.is_empty());
    }

    #[test]
    fn mcnemar_examples() {
        assert!(mcnemar(417, 26).unwrap() < 1e-3);
        assert_eq!(mcnemar(5, 5).unwrap(), 1.0);
        assert_eq!(mcnemar(1, 0).unwrap(), 1.0);
        // 2 * P(X <= 1), X ~ Bin(10, 1/2) = 2 * 11 / 1024
        assert!((mcnemar(9, 1).unwrap() - 22.0 / 1024.0).abs() < 1e-12);
        assert!(mcnemar(0, 0).is_err());
        assert!(mcnemar_chi2(417, 26, true).unwrap() < 1e-3);
    }

    #[test]
    fn cohens_d_examples() {
        let g = |mean, sd| GroupSummary { mean, sd, n: 100 };
        assert_eq!(cohens_d(g(5.0, 1.0), g(5.0, 2.0)).unwrap(), 0.0);
        let d = cohens_d(g(8.4, 1.4), g(9.1, 1.0)).unwrap();
        assert!((d - 0.58).abs() < 0.02);
        let d2 = cohens_d(g(8.4, 2.8), g(9.1, 2.0)).unwrap();
        assert!((d2 - d / 2.0).abs() < 1e-12);
        assert!(cohens_d(g(1.0, 0.0), g(2.0, 0.0)).is_err());
    }

    #[test]
    fn readers_csv_round_trip() {
        let o = vec![
            obs("r1", "c1", Condition::Unassisted, "x", "x", None),
            obs("r1", "c1", Condition::Assisted, "y", "x", Some("y")),
        ];
        let mut buf = Vec::new();
        write_readers(&o, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&READERS_HEADER.join(",")));
        assert_eq!(read_readers(&buf[..]).unwrap(), o);
    }

    proptest! {
        #[test]
        fn mcnemar_symmetric(b in 0usize..300, c in 0usize..300) {
            prop_assume!(b + c > 0);
            prop_assert_eq!(mcnemar(b, c).unwrap(), mcnemar(c, b).unwrap());
        }

        #[test]
        fn outcomes_are_exhaustive(bits in proptest::collection::vec((0u8..3, 0u8..3, 0u8..3), 1..200)) {
            let label = |v: u8| ["x", "y", "z"][v as usize];
            let mut o = Vec::new();
            for (i, (u, m, a)) in bits.iter().enumerate() {
                let id = format!("c{i}");
                o.push(obs("r", &id, Condition::Unassisted, label(*u), "x", None));
                o.push(obs("r", &id, Condition::Assisted, label(*a), "x", Some(label(*m))));
            }
            let c = classify_outcomes(&o).unwrap();
            prop_assert_eq!(c.pairs, bits.len());
            prop_assert_eq!(c.improved + c.confirmed + c.resilient + c.failed, c.pairs);
            prop_assert_eq!(c.missed_opportunity + c.accuracy_loss + c.both_failed, c.failed);
            prop_assert!(c.strict_harm <= c.accuracy_loss);
        }
    }
}
