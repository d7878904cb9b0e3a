//! Random survival forest on landmark rows, where every visit predicts the
//! time remaining until the outcome.

use graftsurv::cohort::{augment, days_to_years, feature_names, fit_normalization, impute, normalize};
use graftsurv::forest::{fit_rsf, Node, RsfConfig};
use graftsurv::synth::{generate_cohort, HazardShape, SimConfig};

fn main() -> graftsurv::Result<()> {
    // Risk grows with squared bilirubin, which a linear model cannot represent.
    let config = SimConfig {
        hazard_shape: HazardShape::Quadratic { feature: 0, scale: 1.0 },
        ..SimConfig::single_region(1500, [0.0, 0.3, -0.3, 0.0, 0.0, 0.0], 4)
    };
    let cohort = generate_cohort(&config)?.patients;
    let stats = fit_normalization(&cohort)?;
    let rows = augment(&normalize(&impute(&cohort, &stats)?, &stats)?).rows;

    let forest = fit_rsf(
        &rows,
        &RsfConfig {
            n_estimators: 50,
            max_depth: 6,
            seed: 4,
            ..RsfConfig::default()
        },
    )?;
    let leaves: usize = forest.trees.iter().map(Node::n_leaves).sum();
    let depth = forest.trees.iter().map(Node::depth).max().unwrap_or(0);
    println!("{} trees on {} rows, {leaves} leaves, max depth {depth}", forest.trees.len(), rows.len());

    // Ensemble mortality traces a U over bilirubin with the other labs held at their means.
    println!("{:>10}{:>12}{:>14}", "bili z", "mortality", "H(5 years)");
    let five_years = forest.time_grid.partition_point(|&t| days_to_years(t) <= 5.0).saturating_sub(1);
    for z in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let mut x = vec![0.0; feature_names().len()];
        x[0] = z;
        let chf = forest.cumulative_hazard(&x)?;
        println!("{z:>10.1}{:>12.1}{:>14.4}", forest.risk(&x)?, chf[five_years]);
    }
    Ok(())
}
