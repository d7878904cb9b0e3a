use graftsurv::cohort::{write_cohort, Biomarker, EventType};
use graftsurv::metrics::{mean_tdci, static_risk, EvalPatient, DEFAULT_PREDICTION_TIMES, DEFAULT_WINDOWS};
use graftsurv::synth::{generate_cohort, oracle_risk, RegionProfile, SimConfig, DEFAULT_ANCHORS};

fn csv_bytes(config: &SimConfig) -> (Vec<u8>, Vec<u8>) {
    let c = generate_cohort(config).unwrap();
    let mut cohort = Vec::new();
    write_cohort(&mut cohort, &c.patients).unwrap();
    let mut truth = Vec::new();
    c.truth.write_csv(&mut truth).unwrap();
    (cohort, truth)
}

#[test]
fn identical_config_gives_identical_bytes() {
    let config = SimConfig::default();
    assert_eq!(csv_bytes(&config), csv_bytes(&config));
    let other = SimConfig {
        seed: config.seed + 1,
        ..config.clone()
    };
    assert_ne!(csv_bytes(&config).0, csv_bytes(&other).0);
}

#[test]
fn adding_patients_keeps_earlier_ones() {
    let small = generate_cohort(&SimConfig::single_region(50, [0.5; 6], 4)).unwrap();
    let large = generate_cohort(&SimConfig::single_region(80, [0.5; 6], 4)).unwrap();
    assert_eq!(small.patients[..], large.patients[..50]);
}

#[test]
fn without_censoring_everyone_fails() {
    let config = SimConfig {
        censoring_rate: 0.0,
        competing_rate: 0.0,
        horizon_years: None,
        ..SimConfig::single_region(300, [0.5, 0.0, 0.0, 0.0, 0.0, 0.0], 2)
    };
    let c = generate_cohort(&config).unwrap();
    assert!(c.patients.iter().all(|p| p.outcome.event_type == EventType::GraftFailure));
}

/// Sum of whatever raw labs are present; an arbitrary fixed score.
fn lab_sum(p: &EvalPatient) -> f64 {
    p.observations[0].covariates.iter().filter(|v| v.is_finite()).sum()
}

#[test]
fn null_coefficients_give_chance_concordance() {
    let c = generate_cohort(&SimConfig::single_region(2000, [0.0; 6], 8)).unwrap();
    let lp: Vec<f64> = c.truth.rows.iter().map(|r| r.linear_predictor).collect();
    assert!(lp.iter().all(|v| *v == lp[0]));
    let patients: Vec<EvalPatient> = c
        .patients
        .iter()
        .map(EvalPatient::from_record)
        .filter(|p| !p.observations.is_empty())
        .collect();
    let risks: Vec<f64> = patients.iter().map(lab_sum).collect();
    let g = mean_tdci(&patients, &static_risk(&risks), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS).unwrap();
    assert!((g.mean - 0.5).abs() <= 0.03, "mean TDCI {}", g.mean);
}

#[test]
fn mean_shift_moves_region_by_two_z_units() {
    let mut shifted = RegionProfile::new("B", 1000);
    shifted.mean_shift[Biomarker::Bilirubin.index()] = 2.0;
    // Null coefficients keep outcomes from thinning visits unevenly across regions.
    let config = SimConfig {
        beta_true: [0.0; 6],
        regions: vec![RegionProfile::new("A", 1000), shifted],
        ..SimConfig::default()
    };
    let c = generate_cohort(&config).unwrap();
    let anchor = DEFAULT_ANCHORS[Biomarker::Bilirubin.index()];
    let mean_z = |region: &str| {
        let z: Vec<f64> = c
            .patients
            .iter()
            .filter(|p| p.region == region)
            .flat_map(|p| p.follow_ups.iter().filter_map(|f| f.panel.get(Biomarker::Bilirubin)))
            .map(|v| (v - anchor.mean) / anchor.sd)
            .collect();
        z.iter().sum::<f64>() / z.len() as f64
    };
    let diff = mean_z("B") - mean_z("A");
    assert!((diff - 2.0).abs() <= 0.1, "shift {diff}");
}

#[test]
fn event_fraction_grows_with_baseline_hazard() {
    let mut last = 0.0;
    for h0 in [0.005, 0.02, 0.08, 0.3] {
        let config = SimConfig {
            baseline_hazard: h0,
            ..SimConfig::single_region(1000, [0.5, 0.2, -0.2, 0.0, 0.1, 0.1], 6)
        };
        let c = generate_cohort(&config).unwrap();
        let frac = c.patients.iter().filter(|p| p.outcome.event_type == EventType::GraftFailure).count() as f64
            / c.patients.len() as f64;
        assert!(frac > last, "h0 {h0}: {frac} after {last}");
        last = frac;
    }
}

#[test]
fn oracle_ranks_well_and_loses_signal_when_permuted() {
    let c = generate_cohort(&SimConfig::single_region(2000, [1.0, 0.3, -0.4, 0.1, 0.2, 0.3], 12)).unwrap();
    let patients: Vec<EvalPatient> = c
        .patients
        .iter()
        .map(EvalPatient::from_record)
        .filter(|p| !p.observations.is_empty())
        .collect();
    let oracle: Vec<f64> = patients.iter().map(|p| oracle_risk(&c.truth, &p.patient_id).unwrap()).collect();
    let good = mean_tdci(&patients, &static_risk(&oracle), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS).unwrap();
    // Rotating by half the length is a fixed permutation unrelated to outcome.
    let n = oracle.len();
    let permuted: Vec<f64> = (0..n).map(|i| oracle[(i + n / 2) % n]).collect();
    let bad = mean_tdci(&patients, &static_risk(&permuted), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS).unwrap();
    assert!(good.mean > 0.7, "oracle {}", good.mean);
    assert!((bad.mean - 0.5).abs() < 0.05, "permuted {}", bad.mean);
    assert!(oracle_risk(&c.truth, "nobody").is_err());
}
