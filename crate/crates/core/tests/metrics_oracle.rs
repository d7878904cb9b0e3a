mod common;

use common::{eval_patient, harrell_oracle, instance, tdci_oracle};
use graftsurv::metrics::{
    bootstrap_ci, evaluate_grid, harrell_c, harrell_counts, mean_tdci, static_risk, tdci,
    BootstrapConfig, DEFAULT_PREDICTION_TIMES, DEFAULT_WINDOWS,
};
use graftsurv::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_cells() -> impl Iterator<Item = (f64, f64)> {
    DEFAULT_PREDICTION_TIMES
        .iter()
        .flat_map(|&t| DEFAULT_WINDOWS.iter().map(move |&w| (t, w)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn harrell_matches_enumeration(inst in instance(50)) {
        let fast = harrell_c(&inst.times, &inst.events, &inst.risks);
        match harrell_oracle(&inst.times, &inst.events, &inst.risks) {
            Some(c) => prop_assert_eq!(fast.unwrap(), c),
            None => prop_assert!(matches!(fast, Err(Error::NoValidPairs))),
        }
    }

    #[test]
    fn tdci_matches_enumeration(inst in instance(50)) {
        let patients = inst.patients();
        let risk = static_risk(&inst.risks);
        for (t, w) in grid_cells().chain([(0.0, 0.25), (2.25, 0.5)]) {
            let fast = tdci(&patients, &risk, t, w).unwrap();
            prop_assert_eq!(fast, tdci_oracle(&patients, &inst.risks, t, w), "t={} w={}", t, w);
        }
    }

    #[test]
    fn monotone_transforms_leave_concordance_unchanged(inst in instance(50)) {
        let positive: Vec<f64> = inst.risks.iter().map(|r| r + 4.0).collect();
        let base_c = harrell_c(&inst.times, &inst.events, &positive).ok();
        let patients = inst.patients();
        let base_grid = mean_tdci(&patients, &static_risk(&positive), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS).ok();
        let transforms: [fn(f64) -> f64; 3] = [f64::exp, |x| 3.0 * x + 7.0, |x| x * x * x];
        for f in transforms {
            let moved: Vec<f64> = positive.iter().map(|&r| f(r)).collect();
            prop_assert_eq!(harrell_c(&inst.times, &inst.events, &moved).ok(), base_c);
            let grid = mean_tdci(&patients, &static_risk(&moved), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS).ok();
            prop_assert_eq!(grid.as_ref().map(|g| &g.values), base_grid.as_ref().map(|g| &g.values));
        }
    }

    #[test]
    fn negating_untied_risks_swaps_concordance(inst in instance(50)) {
        let risks: Vec<f64> = (0..inst.times.len()).map(|i| (i as f64 * 7.3).sin()).collect();
        let neg: Vec<f64> = risks.iter().map(|r| -r).collect();
        let a = harrell_counts(&inst.times, &inst.events, &risks).unwrap();
        let b = harrell_counts(&inst.times, &inst.events, &neg).unwrap();
        prop_assert_eq!(a.tied, 0);
        prop_assert_eq!(a.valid, b.valid);
        prop_assert_eq!(a.concordant + b.concordant, a.valid);
    }

    #[test]
    fn concordance_bounded(inst in instance(30)) {
        if let Ok(c) = harrell_c(&inst.times, &inst.events, &inst.risks) {
            prop_assert!((0.0..=1.0).contains(&c));
        }
        let patients = inst.patients();
        if let Ok(g) = mean_tdci(&patients, &static_risk(&inst.risks), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS) {
            prop_assert!(g.values.iter().flatten().flatten().all(|c| (0.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn baseline_cell_equals_harrell(inst in instance(40)) {
        let patients: Vec<_> = (0..inst.times.len())
            .map(|i| eval_patient(i, inst.times[i], inst.events[i], &[0.0]))
            .collect();
        let max_t = inst.times.iter().cloned().fold(0.0, f64::max);
        let cell = tdci(&patients, &static_risk(&inst.risks), 0.0, max_t + 1.0).unwrap();
        prop_assert_eq!(cell, harrell_oracle(&inst.times, &inst.events, &inst.risks));
        prop_assert_eq!(cell, harrell_c(&inst.times, &inst.events, &inst.risks).ok());
    }
}

#[test]
fn harrell_worked_examples() {
    assert_eq!(harrell_c(&[1.0, 2.0, 3.0], &[true; 3], &[3.0, 2.0, 1.0]).unwrap(), 1.0);
    let c = harrell_c(&[1.0, 2.0, 3.0], &[true, true, false], &[0.5, 0.9, 0.1]).unwrap();
    assert_eq!(c, 2.0 / 3.0);
    assert_eq!(harrell_c(&[1.0, 2.0, 3.0], &[true; 3], &[1.0; 3]).unwrap(), 0.5);
}

#[test]
fn default_grid_has_sixteen_cells() {
    let patients: Vec<_> = (0..40)
        .map(|i| eval_patient(i, 0.3 + i as f64 * 0.3, i % 3 != 0, &[0.0, 0.5, 1.0, 3.0, 5.0]))
        .collect();
    let risks: Vec<f64> = (0..40).map(|i| -(i as f64)).collect();
    let g = mean_tdci(&patients, &static_risk(&risks), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS)
        .unwrap();
    assert_eq!(g.values.len() * g.values[0].len(), 16);
    assert!(g.is_complete());
    assert_eq!(g.mean, 1.0);
}

#[test]
fn no_survival_past_five_years_masks_last_row() {
    // Everyone fails or is censored by 4.9 years.
    let patients: Vec<_> = (0..30)
        .map(|i| eval_patient(i, 0.6 + i as f64 * 0.14, i % 2 == 0, &[0.0, 0.5, 1.0, 3.0]))
        .collect();
    let risks: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
    let g = mean_tdci(&patients, &static_risk(&risks), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS)
        .unwrap();
    let mask = g.mask();
    assert_eq!(mask[3], vec![false; 4]);
    assert!(mask[..3].iter().all(|row| row.iter().all(|&m| m)));
    assert_eq!(g.n_defined(), 12);
    let defined: Vec<f64> = g.values.iter().flatten().flatten().copied().collect();
    assert_eq!(g.mean, defined.iter().sum::<f64>() / 12.0);
}

#[test]
fn all_cells_undefined_is_an_error() {
    let patients: Vec<_> = (0..5).map(|i| eval_patient(i, 0.2, true, &[0.1])).collect();
    let r = mean_tdci(&patients, &static_risk(&[1.0; 5]), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS);
    assert!(r.is_err());
}

/// Percentile interval reimplemented from the resampling rule alone.
fn reference_ci(values: &[f64], seed: u64, n_resamples: usize, level: f64) -> (f64, f64, f64) {
    let n = values.len();
    let mean = |idx: &[usize]| idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64;
    let point = mean(&(0..n).collect::<Vec<_>>());
    let mut stats: Vec<f64> = (0..n_resamples)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            mean(&idx)
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = p * (stats.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(stats.len() - 1);
        stats[lo] + (h - lo as f64) * (stats[hi] - stats[lo])
    };
    let a = (1.0 - level) / 2.0;
    (point, q(a).min(point), q(1.0 - a).max(point))
}

#[test]
fn bootstrap_matches_reference_resampling() {
    let times = [0.7, 1.9, 2.4, 4.1, 6.5];
    let config = BootstrapConfig {
        n_resamples: 1000,
        seed: 7,
        level: 0.95,
    };
    let ci = bootstrap_ci(
        times.len(),
        |idx| Some(idx.iter().map(|&i| times[i]).sum::<f64>() / idx.len() as f64),
        &config,
    )
    .unwrap();
    let (point, lo, hi) = reference_ci(&times, 7, 1000, 0.95);
    assert_eq!((ci.point, ci.lower, ci.upper), (point, lo, hi));
    assert_eq!((ci.n_resamples, ci.seed, ci.n_failed), (1000, 7, 0));
}

#[test]
fn bootstrap_constant_statistic_and_determinism() {
    let config = BootstrapConfig {
        n_resamples: 200,
        seed: 3,
        level: 0.9,
    };
    let ci = bootstrap_ci(10, |_| Some(0.25), &config).unwrap();
    assert_eq!((ci.lower, ci.point, ci.upper), (0.25, 0.25, 0.25));
    let stat = |idx: &[usize]| Some(idx.iter().map(|&i| (i * i) as f64).sum::<f64>());
    assert_eq!(bootstrap_ci(10, stat, &config).unwrap(), bootstrap_ci(10, stat, &config).unwrap());
}

#[test]
fn bootstrap_rejects_too_many_failures_and_few_resamples() {
    let config = BootstrapConfig {
        n_resamples: 100,
        seed: 0,
        level: 0.95,
    };
    // Undefined whenever unit 0 is drawn: far more than 1% of resamples.
    let r = bootstrap_ci(4, |idx| (!idx[1..].contains(&0)).then_some(1.0), &config);
    assert!(matches!(r, Err(Error::BootstrapFailures { .. })));
    let few = BootstrapConfig {
        n_resamples: 99,
        ..config
    };
    assert!(bootstrap_ci(4, |_| Some(1.0), &few).is_err());
}

#[test]
fn grid_evaluation_interval_contains_point() {
    let patients: Vec<_> = (0..60)
        .map(|i| eval_patient(i, 0.6 + (i * 37 % 60) as f64 * 0.2, i % 3 != 1, &[0.0, 0.5, 1.0, 3.0, 5.0]))
        .collect();
    let risks: Vec<f64> = (0..60).map(|i| -((i * 37 % 60) as f64) + (i % 5) as f64 * 3.0).collect();
    let config = BootstrapConfig {
        n_resamples: 300,
        seed: 11,
        level: 0.95,
    };
    let e = evaluate_grid(&patients, &static_risk(&risks), &DEFAULT_PREDICTION_TIMES, &DEFAULT_WINDOWS, &config)
        .unwrap();
    assert!(e.mean_ci.lower <= e.mean_ci.point && e.mean_ci.point <= e.mean_ci.upper);
    assert_eq!(e.mean_ci.point, e.grid.mean);
    for (row, ci_row) in e.grid.values.iter().zip(&e.cell_ci) {
        for (v, ci) in row.iter().zip(ci_row) {
            if let (Some(v), Some([lo, hi])) = (v, ci) {
                assert!(lo <= v && v <= hi);
            }
        }
    }
}
