//! Train an attention MIL model on synthetic bags, then inspect where it
//! attends on a positive test bag.

use milstat::data::{split_dataset, Split, SplitRatios, TaskKind};
use milstat::metrics::macro_auc;
use milstat::mil::{predict_set, train, TrainConfig};
use milstat::synth::{generate_bags, SynthConfig};

fn main() -> milstat::Result<()> {
    let cfg = SynthConfig { n_cases: 120, n_patches_min: 100, n_patches_max: 200, ..SynthConfig::new(TaskKind::Binary, 7) };
    let data = generate_bags(&cfg)?;
    let split = split_dataset(&data.bags, SplitRatios::default(), 7, true)?;

    let config = TrainConfig { hidden: 2, max_epochs: 300, seed: 7, ..TrainConfig::new(TaskKind::Binary) };
    let (model, report) = train(&data.bags, &split, &config)?;
    println!(
        "stopped after {} epochs ({}), best epoch {} with val loss {:.4}",
        report.epochs(),
        report.stop_reason,
        report.best_epoch,
        report.best_val_loss()
    );

    let test: Vec<usize> = (0..data.bags.len()).filter(|&i| split.get(&data.bags[i].case_id) == Some(Split::Test)).collect();
    let bags: Vec<_> = test.iter().map(|&i| data.bags[i].clone()).collect();
    println!("test macro AUC {:.3} on {} bags", macro_auc(&predict_set(&model, &bags)?)?, bags.len());

    let i = *test.iter().find(|&&i| !data.truth[i].planted.is_empty()).expect("a positive test bag");
    let weights = model.attention_weights(&data.bags[i])?;
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let top = &order[..data.truth[i].planted.len()];
    let hits = top.iter().filter(|&&p| data.masks[i][p]).count();
    println!(
        "{}: {hits} of the top {} attended patches are planted (uniform weight {:.4}, top weight {:.4})",
        data.bags[i].case_id,
        top.len(),
        1.0 / weights.len() as f64,
        weights[order[0]]
    );
    Ok(())
}
