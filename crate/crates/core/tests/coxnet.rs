use graftsurv::cohort::{
    feature_names, fit_normalization, impute, normalize, to_counting_process, Biomarker,
    BiomarkerPanel, IntervalRow, RowEvent,
};
use graftsurv::coxnet::{
    default_grid, fit_cox, fit_cox_with, gradient, grid_search, partial_loglik, Covariates,
    FeatureSpace, FitConfig, TiesMethod,
};
use graftsurv::synth::{generate_cohort, SimConfig};
use proptest::prelude::*;

fn rows_strategy() -> impl Strategy<Value = (Vec<IntervalRow>, Vec<f64>)> {
    (3usize..=30, 1usize..=6).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec((0u32..5, 1u32..8, 0u8..3), n),
            prop::collection::vec(-2.0f64..2.0, n * p),
            prop::collection::vec(-1.0f64..1.0, p),
        )
            .prop_map(move |(shape, x, beta)| {
                let rows = shape
                    .iter()
                    .enumerate()
                    .map(|(i, &(start, len, ev))| IntervalRow {
                        patient_id: format!("p{i}"),
                        start: f64::from(start),
                        stop: f64::from(start + len),
                        // Events on at least the first row so the likelihood is non-trivial.
                        event: if ev == 0 || i == 0 { RowEvent::GraftFailure } else { RowEvent::None },
                        covariates: x[i * p..(i + 1) * p].to_vec(),
                    })
                    .collect();
                (rows, beta)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn gradient_matches_central_differences((rows, beta) in rows_strategy()) {
        for ties in [TiesMethod::Breslow, TiesMethod::Efron] {
            let g = gradient(&beta, &rows, ties).unwrap();
            let h = 1e-5;
            for j in 0..beta.len() {
                let mut up = beta.clone();
                let mut down = beta.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (partial_loglik(&up, &rows, ties).unwrap()
                    - partial_loglik(&down, &rows, ties).unwrap())
                    / (2.0 * h);
                let rel = (g[j] - fd).abs() / fd.abs().max(1.0);
                prop_assert!(rel < 1e-6, "{:?} component {}: {} vs {}", ties, j, g[j], fd);
            }
        }
    }

    #[test]
    fn penalized_objective_never_decreases((rows, _beta) in rows_strategy(), l in 0.0f64..2.0, a in 0.0f64..1.0) {
        let config = FitConfig { penalizer: l, l1_ratio: a, ..FitConfig::default() };
        if let Ok(m) = fit_cox(&rows, &config) {
            for w in m.diagnostics.objective_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
            }
        }
    }
}

fn three_subjects() -> Vec<IntervalRow> {
    [(0.0, 1.0), (1.0, 2.0), (0.0, 3.0)]
        .iter()
        .enumerate()
        .map(|(i, &(x, t))| IntervalRow {
            patient_id: format!("s{i}"),
            start: 0.0,
            stop: t,
            event: RowEvent::GraftFailure,
            covariates: vec![x],
        })
        .collect()
}

#[test]
fn three_subject_closed_form() {
    let rows = three_subjects();
    let ll0 = partial_loglik(&[0.0], &rows, TiesMethod::Breslow).unwrap();
    assert!((ll0 - (-(3.0f64).ln() - (2.0f64).ln())).abs() < 1e-12);
    let g0 = gradient(&[0.0], &rows, TiesMethod::Breslow).unwrap();
    assert!((g0[0] - 1.0 / 6.0).abs() < 1e-12);
    let config = FitConfig {
        ties: TiesMethod::Breslow,
        ..FitConfig::default()
    };
    let m = fit_cox(&rows, &config).unwrap();
    assert!((m.coefficients[0] - 2f64.sqrt().ln()).abs() < 1e-4);
    let b = m.coefficients[0];
    let closed = -(b.exp() + 2.0).ln() + b - (b.exp() + 1.0).ln();
    assert!((m.diagnostics.loglik - closed).abs() < 1e-9);
}

fn sparse_problem() -> Vec<IntervalRow> {
    (0..120)
        .map(|i| {
            let f = i as f64;
            let x = vec![(f * 0.37).sin(), (f * 1.3).cos(), (f * 0.11).sin() * 0.5, (f * 2.9).cos()];
            let eta = 1.2 * x[0] - 0.6 * x[1];
            IntervalRow {
                patient_id: format!("p{i}"),
                start: 0.0,
                stop: 1.0 + ((i * 37) % 50) as f64 * (-eta).exp(),
                event: if i % 4 == 3 { RowEvent::None } else { RowEvent::GraftFailure },
                covariates: x,
            }
        })
        .collect()
}

#[test]
fn lasso_sparsity_is_monotone_in_penalty() {
    let rows = sparse_problem();
    let mut last_zeros = 0;
    for l in [0.0, 0.5, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0] {
        let m = fit_cox(&rows, &FitConfig::elastic_net(l, 1.0)).unwrap();
        let zeros = m.coefficients.iter().filter(|b| **b == 0.0).count();
        assert!(zeros >= last_zeros, "λ={l}: {zeros} zeros after {last_zeros}");
        last_zeros = zeros;
    }
    let m = fit_cox(&rows, &FitConfig::elastic_net(1e6, 1.0)).unwrap();
    assert!(m.coefficients.iter().all(|b| *b == 0.0));
}

#[test]
fn rescaling_a_raw_feature_leaves_fit_unchanged() {
    let cohort = generate_cohort(&SimConfig::single_region(300, [0.8, -0.4, 0.0, 0.2, 0.0, 0.3], 5))
        .unwrap()
        .patients;
    let fit = |patients: &[graftsurv::cohort::PatientRecord]| {
        let stats = fit_normalization(patients).unwrap();
        let imputed = impute(patients, &stats).unwrap();
        let rows = to_counting_process(&normalize(&imputed, &stats).unwrap());
        let m = fit_cox_with(&rows, &FitConfig::elastic_net(0.1, 0.5), &FeatureSpace::new(feature_names(), Some(stats)))
            .unwrap();
        let risks: Vec<f64> = rows
            .iter()
            .map(|r| m.linear_risk(Covariates::Normalized(&r.covariates)).unwrap())
            .collect();
        (m.coefficients, risks)
    };
    let (beta, risks) = fit(&cohort);
    let c = 3.7;
    let mut scaled = cohort.clone();
    for p in &mut scaled {
        for f in &mut p.follow_ups {
            let mut v = *f.panel.values();
            let k = Biomarker::Bilirubin.index();
            v[k] = v[k].map(|x| x * c);
            f.panel = BiomarkerPanel::new(v).unwrap();
        }
    }
    let (beta_s, risks_s) = fit(&scaled);
    for (a, b) in beta.iter().zip(&beta_s) {
        assert!((a - b).abs() < 1e-8, "{beta:?} vs {beta_s:?}");
    }
    let order = |r: &[f64]| {
        let mut idx: Vec<usize> = (0..r.len()).collect();
        idx.sort_by(|&i, &j| r[i].total_cmp(&r[j]).then(i.cmp(&j)));
        idx
    };
    let (o, os) = (order(&risks), order(&risks_s));
    // Rank changes are allowed only between risks equal up to rounding.
    for (i, j) in o.iter().zip(&os) {
        assert!(i == j || (risks[*i] - risks[*j]).abs() < 1e-9);
    }
}

#[test]
fn survival_is_nonincreasing_in_time_and_risk() {
    let rows = sparse_problem();
    let m = fit_cox(&rows, &FitConfig::default()).unwrap();
    let z_low = [-1.0, 1.0, 0.0, 0.0];
    let z_high = [1.0, -1.0, 0.0, 0.0];
    assert!(m.linear_risk(Covariates::Normalized(&z_low)).unwrap() < m.linear_risk(Covariates::Normalized(&z_high)).unwrap());
    let mut prev = (1.0, 1.0);
    for k in 0..60 {
        let t = k as f64;
        let lo = m.predict_survival(Covariates::Normalized(&z_low), t).unwrap();
        let hi = m.predict_survival(Covariates::Normalized(&z_high), t).unwrap();
        assert!(lo <= prev.0 && hi <= prev.1 && hi <= lo);
        prev = (lo, hi);
    }
    assert_eq!(m.predict_survival(Covariates::Normalized(&z_high), 0.0).unwrap(), 1.0);
}

#[test]
fn grid_search_runs_all_configs_and_prefers_smaller_penalty_on_ties() {
    let rows = sparse_problem();
    let features = FeatureSpace::anonymous(4);
    let g = grid_search(&rows, &(), &default_grid(), &features, |_, _| Ok(0.5)).unwrap();
    assert_eq!(g.entries.len(), 42);
    assert!(g.entries.iter().all(|e| e.metric == Some(0.5)));
    assert_eq!((g.best_config.penalizer, g.best_config.l1_ratio), (0.0, 0.0));

    let one = [FitConfig::elastic_net(0.2, 0.3)];
    let g = grid_search(&rows, &(), &one, &features, |m, _| Ok(-m.coefficients[0].abs())).unwrap();
    assert_eq!(g.best_config, one[0]);
}

#[test]
fn recovers_generating_coefficients() {
    let truth = [1.0, -0.5, 0.25, 0.0, 0.0, 0.0];
    let start = std::time::Instant::now();
    let cohort = generate_cohort(&SimConfig::single_region(2000, truth, 3)).unwrap().patients;
    let stats = fit_normalization(&cohort).unwrap();
    let imputed = impute(&cohort, &stats).unwrap();
    let rows = to_counting_process(&normalize(&imputed, &stats).unwrap());
    let m = fit_cox(&rows, &FitConfig::default()).unwrap();
    for (b, t) in m.coefficients.iter().zip(truth) {
        assert!((b - t).abs() <= 0.1, "{:?}", m.coefficients);
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}
