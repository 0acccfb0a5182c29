//! Synthetic bags with a planted signal, scored by the max-projection oracle.

use milstat::data::TaskKind;
use milstat::synth::{brute_force_auc, generate_bags, oracle_score, SynthConfig};

fn main() -> milstat::Result<()> {
    for fraction in [0.0, 0.05, 0.1] {
        let cfg = SynthConfig { n_cases: 200, planted_fraction: fraction, ..SynthConfig::new(TaskKind::Binary, 3) };
        let data = generate_bags(&cfg)?;
        let labels: Vec<bool> = data.truth.iter().map(|t| t.label.class() == Some(1)).collect();
        let scores: Vec<f64> = data.bags.iter().map(|b| oracle_score(b, &data.directions[0])).collect();
        let planted: usize = data.truth.iter().map(|t| t.planted.len()).sum();
        println!(
            "planted fraction {fraction:.2}: {} bags, {planted} planted patches, oracle AUC {:.3}",
            data.bags.len(),
            brute_force_auc(&scores, &labels)?
        );
    }
    Ok(())
}
