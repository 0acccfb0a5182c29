//! Paired comparison of two models on the same cases: bootstrap delta,
//! Wilcoxon signed-rank on the replicates and Holm adjustment.

use milstat::data::PredictionSet;
use milstat::resample::{case_bootstrap, holm, paired_delta_ci, paired_wilcoxon, MetricKind, ReplicatePlan};
use milstat::rng::CounterRng;

fn main() -> milstat::Result<()> {
    let mut rng = CounterRng::new(5, 0);
    let labels: Vec<bool> = (0..400).map(|i| i % 3 == 0).collect();
    let latent: Vec<f64> = labels.iter().map(|&y| if y { 1.0 } else { 0.0 } + rng.normal()).collect();
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let weak: Vec<f64> = latent.iter().map(|&l| sigmoid(0.5 * l + rng.normal())).collect();
    let strong: Vec<f64> = latent.iter().map(|&l| sigmoid(2.0 * l)).collect();
    let a = PredictionSet::from_binary_scores(&weak, &labels)?;
    let b = PredictionSet::from_binary_scores(&strong, &labels)?;

    // Both sides resample the same case indices in every replicate.
    let plan = ReplicatePlan::new(11, 1000)?;
    let metrics = [MetricKind::MacroAuc, MetricKind::MacroSensitivity, MetricKind::MacroSpecificity];
    let mut raw = Vec::new();
    for metric in metrics {
        let ra = case_bootstrap(&a, |p| metric.evaluate(p), &plan, None)?;
        let rb = case_bootstrap(&b, |p| metric.evaluate(p), &plan, None)?;
        let delta = paired_delta_ci(&ra, &rb)?;
        let (xa, xb): (Vec<f64>, Vec<f64>) =
            ra.replicates.iter().zip(&rb.replicates).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip();
        let w = paired_wilcoxon(&xa, &xb)?;
        println!("{:<18} delta {:+.3} ({:+.3}, {:+.3}) wilcoxon p {:.2e}", metric.name(), delta.delta, delta.ci_lo, delta.ci_hi, w.p_value);
        raw.push(w.p_value);
    }
    println!("Holm-adjusted: {:?}", holm(&raw)?);
    Ok(())
}
