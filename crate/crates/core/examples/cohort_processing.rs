//! From raw registry records to model-ready rows: exclusions, split,
//! imputation, normalization and the two row layouts the models train on.

use graftsurv::cohort::{
    apply_exclusions, augment, fit_normalization, impute, normalize, split, to_counting_process, ExclusionCriterion,
    SplitFractions,
};
use graftsurv::synth::{generate_cohort, SimConfig};

fn main() -> graftsurv::Result<()> {
    let config = SimConfig {
        missing_rate: 0.05,
        ..SimConfig::single_region(1500, [0.8, 0.3, -0.4, 0.1, 0.1, 0.3], 11)
    };
    let raw = generate_cohort(&config)?.patients;

    let (kept, report) = apply_exclusions(raw, &ExclusionCriterion::registry_defaults())?;
    println!("{} patients before exclusions", report.initial);
    for step in &report.steps {
        println!("  {:<28} -{:<4} {} remain", step.criterion, step.n_excluded, step.n_remaining);
    }

    let parts = split(&kept, SplitFractions::default(), 11)?;
    println!("train {} / val {} / test {}", parts.train.len(), parts.val.len(), parts.test.len());

    // Statistics come from the training split only and are reused everywhere else.
    let stats = fit_normalization(&parts.train)?;
    for (name, (m, s)) in stats.features.iter().zip(stats.mean.iter().zip(&stats.std)) {
        println!("  {name:<10} mean {m:>8.3}  sd {s:>7.3}");
    }
    let train = normalize(&impute(&parts.train, &stats)?, &stats)?;

    let intervals = to_counting_process(&train);
    let aug = augment(&train);
    println!(
        "{} counting-process intervals, {} landmark rows ({} visits dropped at or after the outcome)",
        intervals.len(),
        aug.rows.len(),
        aug.dropped
    );
    if let Some(r) = intervals.first() {
        println!("first interval: {} (day {}, day {}] {:?}", r.patient_id, r.start, r.stop, r.event);
    }
    Ok(())
}
