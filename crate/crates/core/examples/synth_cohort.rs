//! Simulate a two-site registry and write it in the cohort CSV layout.
//!
//! Usage: `cargo run --example synth_cohort [OUT_DIR]`

use std::path::PathBuf;

use graftsurv::cohort::{write_cohort_file, EventType};
use graftsurv::synth::{generate_cohort, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("graftsurv-synth"));
    std::fs::create_dir_all(&out)?;

    let config = SimConfig::default();
    let cohort = generate_cohort(&config)?;

    for region in &config.regions {
        let patients: Vec<_> = cohort.patients.iter().filter(|p| p.region == region.label).collect();
        let failures = patients.iter().filter(|p| p.outcome.event_type == EventType::GraftFailure).count();
        let visits: usize = patients.iter().map(|p| p.follow_ups.len()).sum();
        println!(
            "{:>4}{}  {} patients, {} visits, {:.1}% graft failure",
            region.label,
            if region.held_out { " (held out)" } else { "" },
            patients.len(),
            visits,
            100.0 * failures as f64 / patients.len() as f64
        );
    }

    write_cohort_file(out.join("cohort.csv"), &cohort.patients)?;
    cohort.truth.write_csv_file(out.join("truth.csv"))?;
    std::fs::write(out.join("sim_config.json"), config.to_json()?)?;
    println!("wrote {}", out.display());
    Ok(())
}
