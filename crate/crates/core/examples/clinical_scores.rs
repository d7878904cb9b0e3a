//! Fixed clinical scores on raw lab panels, a user-defined score, and a Cox
//! model refitted on the MELD biomarkers.

use graftsurv::cohort::{
    fit_normalization, impute, normalize, to_counting_process, Biomarker, BiomarkerPanel, NormalizationStats,
};
use graftsurv::coxnet::FitConfig;
use graftsurv::scores::{albi_score, RestrictedVariant, RiskScoreDef};
use graftsurv::synth::{generate_cohort, SimConfig};

fn main() -> graftsurv::Result<()> {
    // bilirubin, creatinine (mg/dL), albumin (g/dL), AST, ALT (U/L), INR
    let panels = [
        ("healthy", [0.6, 0.9, 4.4, 25.0, 22.0, 1.0]),
        ("cholestatic", [4.5, 1.1, 3.6, 90.0, 110.0, 1.3]),
        ("decompensated", [6.0, 2.4, 2.6, 140.0, 95.0, 2.1]),
    ];
    let stats = NormalizationStats::new(
        Biomarker::ALL.iter().map(|b| b.name().to_string()).collect(),
        vec![1.0, 1.2, 3.8, 40.0, 40.0, 1.1],
        vec![0.8, 0.5, 0.5, 25.0, 25.0, 0.3],
    )?;

    // Ratio of transaminases, a score the library does not ship.
    let de_ritis = RiskScoreDef::new("ast_alt_ratio", vec![Biomarker::Ast, Biomarker::Alt], |p: &BiomarkerPanel| {
        Ok(p.require(Biomarker::Ast)? / p.require(Biomarker::Alt)?)
    });
    let scores = [RiskScoreDef::mas(stats), RiskScoreDef::meld(), RiskScoreDef::albi(), de_ritis];

    print!("{:<15}", "panel");
    for s in &scores {
        print!("{:>14}", s.name);
    }
    println!("{:>11}", "ALBI grade");
    for (name, values) in panels {
        let panel = BiomarkerPanel::complete(values)?;
        print!("{name:<15}");
        for s in &scores {
            print!("{:>14.3}", s.compute(&panel)?);
        }
        println!("{:>11}", albi_score(&panel)?.grade);
    }

    // The same three labs as MELD, with weights learned from outcomes instead.
    let cohort = generate_cohort(&SimConfig::single_region(1500, [0.9, 0.4, -0.3, 0.0, 0.0, 0.5], 2))?.patients;
    let stats = fit_normalization(&cohort)?;
    let rows = to_counting_process(&normalize(&impute(&cohort, &stats)?, &stats)?);
    let variant = RestrictedVariant::CoxMeld;
    let names: Vec<&str> = variant.features().into_iter().map(Biomarker::name).collect();
    let model = graftsurv::scores::train_restricted_cox(&names, &rows, &FitConfig::default(), Some(&stats))?;
    println!("\n{}:", variant.name());
    for (f, b) in model.feature_names.iter().zip(&model.coefficients) {
        println!("  {f:<11}{b:>8.3}");
    }
    Ok(())
}
