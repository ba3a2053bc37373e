use super::config::{FitSpec, RunConfig};
use super::csv::{format_value, write_atomic, CsvError};
use super::run::{run, RunError};
use crate::chemo::StepError;
use crate::oracles::DecayModel;
use rayon::prelude::*;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("mu list is empty")]
    Empty,
    #[error("mu values must be positive and finite, got {0}")]
    BadMu(f64),
    #[error("jobs must be at least 1")]
    Jobs,
    #[error("cannot build thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    /// False only when the blow-up guard fired.
    pub bounded: bool,
    pub completed: bool,
    pub final_dev_inf: Option<f64>,
    /// Exponential rate of `dev_inf` over the fit window.
    pub rate: Option<f64>,
    pub r_squared: Option<f64>,
    /// Names of configured checks that did not pass.
    pub failed_checks: Vec<String>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: &str = "mu,bounded,completed,final_dev_inf,rate,r_squared,failed_checks,error";

fn one(base: &RunConfig, mu: f64) -> SweepRow {
    let mut cfg = base.clone();
    cfg.params.mu = mu;
    cfg.out_path = None;
    let dev_fit = FitSpec { column: "dev_inf".into(), model: DecayModel::Exponential };
    if !cfg.fits.contains(&dev_fit) {
        cfg.fits.push(dev_fit);
    }
    match run(&cfg) {
        Ok(out) => {
            let fit = out.fit("dev_inf").and_then(|f| f.outcome.as_ref().ok());
            SweepRow {
                mu,
                bounded: true,
                completed: true,
                final_dev_inf: out.rows.last().map(|r| r.dev_inf),
                rate: fit.map(|f| f.rate),
                r_squared: fit.map(|f| f.r_squared),
                failed_checks: out.checks.iter().filter(|c| !c.passed()).map(|c| c.kind.to_string()).collect(),
                error: out.fit("dev_inf").and_then(|f| f.outcome.as_ref().err()).map(|e| e.to_string()),
            }
        }
        Err(e) => SweepRow {
            mu,
            bounded: !matches!(e, RunError::Step { source: StepError::BlowUp { .. }, .. }),
            completed: false,
            final_dev_inf: None,
            rate: None,
            r_squared: None,
            failed_checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Runs `base` once per `mu` on `jobs` threads. Failures are recorded per row;
/// rows come back sorted by `mu` (stable for duplicates).
pub fn sweep_mu(base: &RunConfig, mu_values: &[f64], jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    if mu_values.is_empty() {
        return Err(SweepError::Empty);
    }
    if let Some(&bad) = mu_values.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(SweepError::BadMu(bad));
    }
    if jobs == 0 {
        return Err(SweepError::Jobs);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let mut sorted = mu_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(pool.install(|| sorted.par_iter().map(|&mu| one(base, mu)).collect()))
}

fn opt(x: Option<f64>) -> String {
    x.map(format_value).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            format_value(r.mu),
            r.bounded,
            r.completed,
            opt(r.final_dev_inf),
            opt(r.rate),
            opt(r.r_squared),
            r.failed_checks.join(";"),
            err
        ));
    }
    s
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), CsvError> {
    write_atomic(path, &sweep_csv(rows))
}
