//! Case-level bootstrap intervals for discrimination and thresholded metrics.

use milstat::data::{CasePrediction, PredictionSet, Target};
use milstat::metrics::{macro_at_youden, per_class_youden};
use milstat::report::Interval;
use milstat::resample::{case_bootstrap, MetricKind, ReplicatePlan};
use milstat::rng::CounterRng;

fn noisy_predictions(n: usize, classes: usize, seed: u64) -> milstat::Result<PredictionSet> {
    let mut rng = CounterRng::new(seed, 0);
    let cases = (0..n)
        .map(|i| {
            let y = i % classes;
            let mut raw: Vec<f64> = (0..classes).map(|_| rng.next_f64()).collect();
            raw[y] += 0.5;
            let total: f64 = raw.iter().sum();
            CasePrediction { case_id: format!("case{i:03}"), target: Target::Class(y), scores: raw.iter().map(|r| r / total).collect() }
        })
        .collect();
    PredictionSet::classification(classes, cases)
}

fn main() -> milstat::Result<()> {
    let pred = noisy_predictions(300, 3, 1)?;
    let plan = ReplicatePlan::new(42, 1000)?;
    for metric in [MetricKind::MacroAuc, MetricKind::MacroSensitivity, MetricKind::MacroSpecificity] {
        let boot = case_bootstrap(&pred, |p| metric.evaluate(p), &plan, None)?;
        match Interval::from_bootstrap(&boot) {
            Some(i) => println!("{:<20} {}", metric.name(), i.text),
            None => println!("{:<20} undefined", metric.name()),
        }
    }
    for (class, point) in per_class_youden(&pred)? {
        println!("class {class}: Youden threshold {:.3}", point.threshold);
    }
    let m = macro_at_youden(&pred)?;
    println!("macro metrics at Youden thresholds: {m:?}");
    Ok(())
}
