//! Decision curve and triage operating points for a binary risk model.

use milstat::decision::{dca_curve, default_grid, missed_at_specificity, pool_markers, triage_sweep};
use milstat::rng::CounterRng;

fn main() -> milstat::Result<()> {
    let mut rng = CounterRng::new(2, 0);
    let labels: Vec<bool> = (0..500).map(|_| rng.next_f64() < 0.3).collect();
    let probs: Vec<f64> = labels
        .iter()
        .map(|&y| {
            let x = if y { 1.5 } else { -1.0 } + rng.normal();
            1.0 / (1.0 + (-x).exp())
        })
        .collect();

    println!("p_t    model     all      none");
    for p in dca_curve(&probs, &labels, &default_grid())?.iter().step_by(10) {
        println!("{:.2} {:>8.4} {:>8.4} {:>8.4}", p.p_t, p.nb_model, p.nb_treat_all, p.nb_treat_none);
    }

    let point = triage_sweep(&probs, &labels, 0.95)?;
    println!(
        "defer {:.1}% at threshold {:.3}: PPV {:.3}, sensitivity {:.3}",
        100.0 * point.defer_fraction,
        point.threshold,
        point.ppv,
        point.sensitivity
    );
    let missed = missed_at_specificity(&probs, &labels, 0.9)?;
    println!("at specificity >= 0.90: {} positives missed below threshold {:.3}", missed.missed, missed.threshold);

    // Two cohorts triaged separately, pooled by counts.
    let half = labels.len() / 2;
    let first = triage_sweep(&probs[..half], &labels[..half], 0.95)?;
    let second = triage_sweep(&probs[half..], &labels[half..], 0.95)?;
    let pooled = pool_markers(&[first, second])?;
    println!("pooled: {}/{} deferred, PPV {:.3}", pooled.deferred, pooled.total, pooled.ppv);
    Ok(())
}
