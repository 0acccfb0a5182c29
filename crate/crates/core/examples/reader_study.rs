//! A simulated two-period crossover reader study analysed end to end.

use milstat::reader::{rct_report, Condition, Experience, ReaderObservation, Sequence};
use milstat::rng::CounterRng;

fn simulate(seed: u64) -> Vec<ReaderObservation> {
    let mut rng = CounterRng::new(seed, 0);
    let dx = ["adeno", "squamous", "small-cell"];
    let mut obs = Vec::new();
    for r in 0..8 {
        let experience = if r < 4 { Experience::Junior } else { Experience::Senior };
        let sequence = if r % 2 == 0 { Sequence::A } else { Sequence::B };
        for (t, task) in ["subtype", "grade"].iter().enumerate() {
            for c in 0..30 {
                let truth = dx[(c + t) % 3];
                let model = if rng.next_f64() < 0.9 { truth } else { dx[(c + t + 1) % 3] };
                for condition in [Condition::Unassisted, Condition::Assisted] {
                    let assisted = condition == Condition::Assisted;
                    let period = match (sequence, assisted) {
                        (Sequence::A, false) | (Sequence::B, true) => 1,
                        _ => 2,
                    };
                    let skill = if experience == Experience::Senior { 0.8 } else { 0.65 };
                    let diagnosis = if assisted && rng.next_f64() < 0.6 {
                        model
                    } else if rng.next_f64() < skill {
                        truth
                    } else {
                        dx[(c + t + 2) % 3]
                    };
                    obs.push(ReaderObservation {
                        reader_id: format!("R{r}"),
                        experience,
                        sequence,
                        period,
                        condition,
                        task: task.to_string(),
                        case_id: format!("{task}-{c:02}"),
                        diagnosis: diagnosis.into(),
                        truth: truth.into(),
                        model_prediction: assisted.then(|| model.to_string()),
                        time_sec: 60.0 * (if assisted { 0.8 } else { 1.0 }) * (0.3 * rng.normal()).exp(),
                        confidence: (if assisted { 8.0 } else { 7.0 } + rng.normal()).round().clamp(1.0, 10.0),
                    });
                }
            }
        }
    }
    obs
}

fn main() -> milstat::Result<()> {
    let obs = simulate(9);
    let report = rct_report(&obs, 500, 2000, 9)?;
    println!("{} reads by {} readers", report.n_observations, report.n_readers);
    for m in &report.models {
        match &m.effect {
            Some(e) if m.measure == "difference" => {
                println!("{:<28} {:<12} difference {:+.2} ({:+.2}, {:+.2}) p {:.3}", m.model, m.term, e.beta, e.beta_lo, e.beta_hi, e.p_value)
            }
            Some(e) => println!("{:<28} {:<12} {} {:.2} ({:.2}, {:.2}) p {:.3}", m.model, m.term, m.measure, e.ratio, e.ratio_lo, e.ratio_hi, e.p_value),
            None => println!("{:<28} not estimable: {}", m.model, m.error.as_deref().unwrap_or("")),
        }
    }
    if let Some(k) = &report.agreement {
        println!(
            "Fleiss kappa {:.2} ({}) -> {:.2} ({}), permutation p {:.4}",
            k.unassisted.kappa, k.unassisted.band, k.assisted.kappa, k.assisted.band, k.p_value
        );
    }
    if let Some(u) = &report.utility {
        println!("improved {:.1}%, accuracy loss {:.1}%, McNemar p {:?}", u.improved_pct, u.accuracy_loss_pct, u.mcnemar_p);
    }
    Ok(())
}
