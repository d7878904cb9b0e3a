//! Risk modelling for graft failure from repeated liver-function panels.
//!
//! The crate covers the whole path from registry records to model
//! comparison. It simulates cohorts ([`synth`]) and prepares records
//! ([`cohort`]), then fits penalized Cox models ([`coxnet`]), random survival
//! forests ([`forest`]) and fixed clinical scores ([`scores`]). Risks are
//! evaluated by time-dependent concordance ([`metrics`]), models are ranked
//! across sites ([`stats`]), and [`pipeline`] wires all of it into one
//! deterministic run. Each capability has a runnable program under `examples/`.
//!
//! ```
//! use graftsurv::cohort::{fit_normalization, impute, normalize, to_counting_process};
//! use graftsurv::coxnet::{fit_cox, FitConfig};
//! use graftsurv::synth::{generate_cohort, SimConfig};
//!
//! let cohort = generate_cohort(&SimConfig::single_region(400, [1.0, 0.0, -0.5, 0.0, 0.0, 0.0], 7))?.patients;
//! let stats = fit_normalization(&cohort)?;
//! let rows = to_counting_process(&normalize(&impute(&cohort, &stats)?, &stats)?);
//! let model = fit_cox(&rows, &FitConfig::elastic_net(0.01, 0.5))?;
//! assert!(model.coefficients[0] > 0.0);
//! # Ok::<(), graftsurv::Error>(())
//! ```

pub mod cli;
pub mod cohort;
pub mod coxnet;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod pipeline;
pub mod scores;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
