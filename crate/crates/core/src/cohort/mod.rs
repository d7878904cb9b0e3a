//! Longitudinal cohort ingestion and preparation.
//!
//! Raw patient records are filtered, split at the patient level, imputed,
//! z-scored with training statistics, and reshaped into either
//! counting-process intervals (time-varying Cox) or per-visit samples
//! (random survival forest).

mod exclusion;
mod io;
mod split;
mod transform;
mod types;

pub use exclusion::{apply_exclusions, ExclusionCriterion, ExclusionReport, ExclusionStep};
pub use io::{load_cohort, write_cohort, write_cohort_file, CohortSchema};
pub use split::{split, CohortSplit, SplitFractions};
pub use transform::{
    augment, fit_normalization, impute, normalize, to_counting_process, Augmented,
    NormalizationStats, NormalizedFollowUp, NormalizedPatient,
};
pub use types::{
    days_to_years, feature_names, years_to_days, AugmentedRow, Biomarker, BiomarkerPanel,
    EventType, FollowUpRecord, IntervalRow, Outcome, PatientRecord, RowEvent, DAYS_PER_YEAR,
};

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn panel(bili: Option<f64>) -> BiomarkerPanel {
        BiomarkerPanel::new([bili, Some(1.0), Some(3.5), Some(30.0), Some(25.0), Some(1.1)])
            .unwrap()
    }

    fn patient(id: &str, days: &[u32], event: EventType, event_day: u32) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            region: "R1".into(),
            age_at_transplant: 50.0,
            transplant_count: 1,
            organ_count: 1,
            transplant_date: NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
            follow_ups: days
                .iter()
                .map(|&d| FollowUpRecord {
                    day: d,
                    panel: panel(Some(1.0 + d as f64 / 1000.0)),
                })
                .collect(),
            outcome: Outcome {
                event_type: event,
                event_day,
            },
        }
    }

    fn simple_stats() -> NormalizationStats {
        NormalizationStats::new(feature_names(), vec![2.0, 1.0, 3.5, 30.0, 25.0, 1.1], vec![1.0; 6])
            .unwrap()
    }

    #[test]
    fn panel_rejects_nonpositive() {
        assert!(BiomarkerPanel::new([Some(0.0), None, None, None, None, None]).is_err());
        assert!(BiomarkerPanel::new([Some(-1.0), None, None, None, None, None]).is_err());
        assert!(BiomarkerPanel::new([Some(f64::NAN), None, None, None, None, None]).is_err());
    }

    #[test]
    fn min_age_boundary() {
        let mut c: Vec<_> = [17.0, 18.0, 50.0]
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let mut p = patient(&format!("p{i}"), &[180], EventType::Censored, 400);
                p.age_at_transplant = a;
                p
            })
            .collect();
        c.shrink_to_fit();
        let (kept, report) =
            apply_exclusions(c, &[ExclusionCriterion::MinAge { years: 18.0 }]).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(report.steps[0].n_excluded, 1);
        assert_eq!(report.final_size(), 2);
    }

    #[test]
    fn exclusion_charges_first_criterion() {
        let mut a = patient("a", &[], EventType::Censored, 100);
        a.transplant_count = 2;
        let b = patient("b", &[], EventType::Censored, 100);
        let c = patient("c", &[180], EventType::Censored, 400);
        let (kept, report) = apply_exclusions(
            vec![a, b, c],
            &[
                ExclusionCriterion::FirstTransplantOnly,
                ExclusionCriterion::RequiresFollowUp,
            ],
        )
        .unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(report.steps[0].n_excluded, 1);
        assert_eq!(report.steps[1].n_excluded, 1);
        assert_eq!(report.steps[1].n_remaining, 1);
    }

    #[test]
    fn empty_criteria_rejected() {
        assert!(apply_exclusions(vec![], &[]).is_err());
    }

    #[test]
    fn split_sizes_largest_remainder() {
        let f = SplitFractions::default();
        assert_eq!(f.sizes(100), [70, 15, 15]);
        // 7.0, 1.5, 1.5: the tied remainder goes to validation.
        assert_eq!(f.sizes(10), [7, 2, 1]);
        assert_eq!(f.sizes(3), [2, 1, 0]);
    }

    #[test]
    fn split_is_deterministic_partition() {
        let c: Vec<_> = (0..100)
            .map(|i| patient(&format!("p{i:03}"), &[180], EventType::Censored, 400))
            .collect();
        let a = split(&c, SplitFractions::default(), 42).unwrap();
        let b = split(&c, SplitFractions::default(), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (70, 15, 15));
        let mut ids: Vec<_> = a
            .train
            .iter()
            .chain(&a.val)
            .chain(&a.test)
            .map(|p| p.patient_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 100);
        let other = split(&c, SplitFractions::default(), 43).unwrap();
        assert_ne!(a.train, other.train);
    }

    #[test]
    fn split_rejects_tiny_cohort() {
        let c: Vec<_> = (0..2)
            .map(|i| patient(&format!("p{i}"), &[180], EventType::Censored, 400))
            .collect();
        assert!(split(&c, SplitFractions::default(), 1).is_err());
        let bad = SplitFractions {
            train: 0.5,
            val: 0.5,
            test: 0.5,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn forward_fill_then_mean() {
        let mut p = patient("a", &[180, 365, 730], EventType::Censored, 1000);
        p.follow_ups[0].panel = panel(Some(1.0));
        p.follow_ups[1].panel = panel(None);
        p.follow_ups[2].panel = panel(Some(2.0));
        let mut q = patient("b", &[180], EventType::Censored, 1000);
        q.follow_ups[0].panel =
            BiomarkerPanel::new([Some(1.0), Some(1.0), None, Some(30.0), Some(25.0), Some(1.1)])
                .unwrap();
        let out = impute(&[p, q], &simple_stats()).unwrap();
        let bili: Vec<_> = out[0]
            .follow_ups
            .iter()
            .map(|f| f.panel.get(Biomarker::Bilirubin).unwrap())
            .collect();
        assert_eq!(bili, vec![1.0, 1.0, 2.0]);
        assert_eq!(out[1].follow_ups[0].panel.get(Biomarker::Albumin), Some(3.5));
        assert!(out.iter().all(|p| p.follow_ups.iter().all(|f| f.panel.is_complete())));
    }

    #[test]
    fn fully_observed_unchanged_by_impute() {
        let p = patient("a", &[180, 365], EventType::Censored, 1000);
        let out = impute(std::slice::from_ref(&p), &simple_stats()).unwrap();
        assert_eq!(out[0], p);
    }

    #[test]
    fn population_std() {
        let mut a = patient("a", &[180, 365], EventType::Censored, 1000);
        for (f, v) in a.follow_ups.iter_mut().zip([1.0, 3.0]) {
            f.panel = BiomarkerPanel::complete([v, v, v, v, v, v]).unwrap();
        }
        let stats = fit_normalization(&[a.clone()]).unwrap();
        assert_eq!(stats.mean[0], 2.0);
        assert_eq!(stats.std[0], 1.0);
        let z = normalize(&[a], &stats).unwrap();
        assert_eq!(z[0].follow_ups[0].z[0], -1.0);
        assert_eq!(z[0].follow_ups[1].z[0], 1.0);
        // no clipping below the training range
        assert!(stats.z(0, 0.5) < -1.0);
    }

    #[test]
    fn constant_feature_rejected() {
        let p = patient("a", &[180, 365], EventType::Censored, 1000);
        match fit_normalization(&[p]) {
            Err(crate::Error::ConstantFeature(name)) => assert_eq!(name, "creatinine"),
            other => panic!("expected constant feature error, got {other:?}"),
        }
    }

    fn normalized(days: &[u32], event: EventType, event_day: u32) -> NormalizedPatient {
        NormalizedPatient {
            patient_id: "p".into(),
            region: "R".into(),
            follow_ups: days
                .iter()
                .map(|&d| NormalizedFollowUp {
                    day: d,
                    z: vec![d as f64],
                })
                .collect(),
            outcome: Outcome {
                event_type: event,
                event_day,
            },
        }
    }

    #[test]
    fn augment_time_to_event() {
        let out = augment(&[normalized(&[180, 365], EventType::GraftFailure, 1000)]);
        let tte: Vec<_> = out.rows.iter().map(|r| r.time_to_event).collect();
        assert_eq!(tte, vec![820.0, 635.0]);
        assert!(out.rows.iter().all(|r| r.event == RowEvent::GraftFailure));
        assert_eq!(out.dropped, 0);
    }

    #[test]
    fn augment_drops_zero_duration() {
        let out = augment(&[normalized(&[180, 500], EventType::Censored, 500)]);
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn counting_process_intervals() {
        let rows = to_counting_process(&[normalized(&[180, 365], EventType::GraftFailure, 1000)]);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].start, rows[0].stop, rows[0].event), (180.0, 365.0, RowEvent::None));
        assert_eq!(
            (rows[1].start, rows[1].stop, rows[1].event),
            (365.0, 1000.0, RowEvent::GraftFailure)
        );
        assert_eq!(rows[1].covariates, vec![365.0]);

        let rows = to_counting_process(&[normalized(&[180], EventType::Censored, 500)]);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].start, rows[0].stop, rows[0].event), (180.0, 500.0, RowEvent::None));
    }

    #[test]
    fn counting_process_skips_visit_at_event_day() {
        let rows = to_counting_process(&[normalized(&[180, 365, 1000], EventType::GraftFailure, 1000)]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].event, RowEvent::GraftFailure);
        assert!(rows.iter().all(|r| r.start < r.stop));
    }
}
