//! Survival evaluation: C-index, median risk split, Kaplan-Meier and log-rank.

use milstat::data::SurvivalRecord;
use milstat::survival::{c_index, km_estimate, logrank, median_split, RiskGroup};
use milstat::rng::CounterRng;

fn main() -> milstat::Result<()> {
    let mut rng = CounterRng::new(4, 0);
    let n = 300;
    let risk: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let records: Vec<SurvivalRecord> = risk
        .iter()
        .map(|&r| {
            let event_time = 50.0 * (-0.8 * r).exp() * (-rng.next_f64().ln());
            let censor = 120.0 * rng.next_f64();
            SurvivalRecord::new(event_time.min(censor).max(1e-3), event_time <= censor)
        })
        .collect::<milstat::Result<_>>()?;

    println!("C-index {:.3}", c_index(&risk, &records)?);
    let groups = median_split(&risk)?;
    let pick = |g: RiskGroup| -> Vec<SurvivalRecord> { records.iter().zip(&groups).filter(|(_, &x)| x == g).map(|(r, _)| *r).collect() };
    let (high, low) = (pick(RiskGroup::High), pick(RiskGroup::Low));
    for (name, group) in [("high", &high), ("low", &low)] {
        let km = km_estimate(group)?;
        println!("{name} risk: n {}, S(30) {:.3}, S(60) {:.3}", group.len(), km.survival_at(30.0), km.survival_at(60.0));
    }
    let lr = logrank(&high, &low)?;
    println!("log-rank chi2 {:.2}, p {:.2e}", lr.statistic, lr.p_value);
    Ok(())
}
