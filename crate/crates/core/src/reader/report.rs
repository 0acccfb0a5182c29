use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::gee::{COL_AI, COL_AI_PERIOD, COL_AI_SENIOR, COL_PERIOD};
use super::{
    accuracy_summary, classify_outcomes, cohens_d, gee_fit, kappa_inference, mcnemar, rct_design, AccuracySummary,
    ClusterUnit, Condition, DesignOptions, Effect, GeeOptions, GroupSummary, KappaInference, OutcomeCounts,
    ReaderObservation, RctOutcome,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    pub term: String,
    /// How the effect reads: `odds_ratio`, `time_ratio` or `difference`.
    pub measure: String,
    pub effect: Option<Effect>,
    pub alpha: Option<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Why the model could not be estimated.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSummary {
    pub unassisted: GroupSummary,
    pub assisted: GroupSummary,
    pub cohens_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySummary {
    pub counts: OutcomeCounts,
    pub improved_pct: f64,
    pub accuracy_loss_pct: f64,
    pub mcnemar_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RctReport {
    pub n_observations: usize,
    pub n_readers: usize,
    pub accuracy: AccuracySummary,
    /// Odds ratios (accuracy) and time ratios from GEE fits.
    pub models: Vec<ModelResult>,
    pub confidence: Option<ConfidenceSummary>,
    pub agreement: Option<KappaInference>,
    pub agreement_error: Option<String>,
    pub utility: Option<UtilitySummary>,
    pub utility_error: Option<String>,
}

fn fit_model(name: &str, term: &str, obs: &[ReaderObservation], opts: DesignOptions, keep_period_one: bool) -> ModelResult {
    let measure = match opts.outcome {
        RctOutcome::Accuracy => "odds_ratio",
        RctOutcome::LogTime => "time_ratio",
        RctOutcome::Confidence => "difference",
    };
    let run = || -> Result<(Effect, f64, usize, usize)> {
        let mut design = rct_design(obs, &opts)?;
        if keep_period_one {
            if let Some(j) = design.column(COL_PERIOD) {
                let keep: Vec<bool> = (0..design.y.len()).map(|i| design.x[(i, j)] == 0.0).collect();
                design = design.filter_rows(&keep)?.without(COL_PERIOD)?;
            }
        }
        let fit = gee_fit(&design, &GeeOptions::new(opts.outcome.family()))?;
        let effect = fit.effect(term).ok_or_else(|| crate::error::Error::invalid(format!("term {term} not in design")))?;
        Ok((effect, fit.alpha, fit.n_obs, fit.n_clusters))
    };
    match run() {
        Ok((effect, alpha, n_obs, n_clusters)) => ModelResult {
            model: name.into(),
            term: term.into(),
            measure: measure.into(),
            effect: Some(effect),
            alpha: Some(alpha),
            n_obs,
            n_clusters,
            error: None,
        },
        Err(e) => ModelResult {
            model: name.into(),
            term: term.into(),
            measure: measure.into(),
            effect: None,
            alpha: None,
            n_obs: 0,
            n_clusters: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Accuracy, GEE effects, agreement and AI-impact outcomes for a
/// crossover reader study.
pub fn rct_report(obs: &[ReaderObservation], n_boot: usize, n_perm: usize, seed: u64) -> Result<RctReport> {
    for o in obs {
        o.validate()?;
    }
    let readers: BTreeSet<&str> = obs.iter().map(|o| o.reader_id.as_str()).collect();
    let tasks: BTreeSet<&str> = obs.iter().map(|o| o.task.as_str()).collect();
    let acc = |cluster| DesignOptions::new(RctOutcome::Accuracy, cluster);

    let mut models = vec![fit_model("accuracy", COL_AI, obs, acc(ClusterUnit::PathologistCase), false)];
    for t in &tasks {
        let subset: Vec<ReaderObservation> = obs.iter().filter(|o| o.task == *t).cloned().collect();
        models.push(fit_model(&format!("accuracy[{t}]"), COL_AI, &subset, acc(ClusterUnit::Pathologist), false));
    }
    let mut with_period = acc(ClusterUnit::PathologistCase);
    with_period.ai_x_period = true;
    models.push(fit_model("accuracy ai x period", COL_AI_PERIOD, obs, with_period, false));
    let mut with_exp = acc(ClusterUnit::PathologistCase);
    with_exp.ai_x_experience = true;
    models.push(fit_model("accuracy ai x experience", COL_AI_SENIOR, obs, with_exp, false));
    models.push(fit_model("accuracy period 1", COL_AI, obs, acc(ClusterUnit::PathologistCase), true));
    models.push(fit_model("log time", COL_AI, obs, DesignOptions::new(RctOutcome::LogTime, ClusterUnit::Pathologist), false));
    models.push(fit_model("confidence", COL_AI, obs, DesignOptions::new(RctOutcome::Confidence, ClusterUnit::Pathologist), false));

    let conf = |c: Condition| obs.iter().filter(|o| o.condition == c).map(|o| o.confidence).collect::<Vec<_>>();
    let confidence = match (GroupSummary::of(&conf(Condition::Unassisted)), GroupSummary::of(&conf(Condition::Assisted))) {
        (Ok(u), Ok(a)) => Some(ConfidenceSummary { unassisted: u, assisted: a, cohens_d: cohens_d(u, a).ok() }),
        _ => None,
    };

    let (agreement, agreement_error) = match kappa_inference(obs, n_boot, n_perm, seed) {
        Ok(k) => (Some(k), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let (utility, utility_error) = match classify_outcomes(obs) {
        Ok(counts) => (
            Some(UtilitySummary {
                counts,
                improved_pct: counts.percent(counts.improved),
                accuracy_loss_pct: counts.percent(counts.accuracy_loss),
                mcnemar_p: mcnemar(counts.improved, counts.accuracy_loss).ok(),
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };

    Ok(RctReport {
        n_observations: obs.len(),
        n_readers: readers.len(),
        accuracy: accuracy_summary(obs),
        models,
        confidence,
        agreement,
        agreement_error,
        utility,
        utility_error,
    })
}
