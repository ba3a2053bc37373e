use super::config::{CheckKind, ConfigError, FitSpec, RunConfig};
use super::csv::{self, CsvError, DiagnosticsRow};
use crate::chemo::{advance, init_state, InitError, State, StepError};
use crate::functionals::{energy, norms, DerivedConstants};
use crate::grid::divergence;
use crate::oracles::{
    fit_decay, l1_decay_bound, two_sided_algebraic_check, upper_algebraic_check, BoundCheck, DecayFit, OracleError,
    SANDWICH_RATIO_CAP,
};
use std::path::Path;
use thiserror::Error;

/// Relative slack of the `L^1` envelope.
pub const L1_SLACK: f64 = 0.05;
/// Cap on the growth of `||grad w||_inf (t+1)` over the check window.
pub const GRADW_RATIO_CAP: f64 = 50.0;
/// Final `int |grad w|^2` may be at most this fraction of its peak.
pub const GRADW_VANISH_FRACTION: f64 = 0.01;
/// Allowed step-to-step increase of `c_max`, relative to `max c0`.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-12;
/// Allowed clamped mass, relative to the initial mass.
pub const CLAMP_FRACTION: f64 = 1e-8;
/// Allowed per-step increase of the energy functional.
pub const ENERGY_INCREMENT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initialization failed: {0}")]
    Init(#[from] InitError),
    #[error("step failed at t = {t}: {source}")]
    Step { t: f64, source: StepError },
    #[error(transparent)]
    Csv(#[from] CsvError),
}

impl RunError {
    /// 2 for configuration problems, 1 for numerical or I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Init(_) => 2,
            Self::Step { .. } | Self::Csv(_) => 1,
        }
    }
}

/// Extremes recorded after every time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub t: f64,
    pub dt: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub w_min: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub energy_f: f64,
    pub clamped_mass_cum: f64,
}

impl StepSample {
    fn of(state: &State, cfg: &RunConfig, dt: f64) -> Self {
        let e = energy(state, &cfg.params, cfg.energy_a);
        let w_max = state.w.max();
        let w_min = state.w.min();
        Self {
            t: state.t,
            dt,
            n_min: state.n.min(),
            n_max: state.n.max(),
            w_min,
            c_min: state.c0_max * (-w_max).exp(),
            c_max: state.c0_max * (-w_min).exp(),
            energy_f: e.f_value,
            clamped_mass_cum: state.clamped_mass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: FitSpec,
    pub window: (f64, f64),
    pub outcome: Result<DecayFit, OracleError>,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub kind: CheckKind,
    pub outcome: Result<BoundCheck, OracleError>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(c) if c.passed())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<DiagnosticsRow>,
    pub trace: Vec<StepSample>,
    pub checks: Vec<CheckResult>,
    pub fits: Vec<FitResult>,
    pub constants: DerivedConstants,
    pub final_state: State,
}

impl RunOutput {
    pub fn series(&self, column: &str) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.get(column).map(|v| (r.t, v))).collect()
    }

    pub fn check(&self, kind: CheckKind) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.kind == kind)
    }

    pub fn fit(&self, column: &str) -> Option<&FitResult> {
        self.fits.iter().find(|f| f.spec.column == column)
    }
}

/// Fails early if the CSV could not be created at `path`.
pub fn validate_out_path(path: &Path) -> Result<(), ConfigError> {
    let bad = |reason: &str| ConfigError::OutPath { path: path.to_path_buf(), reason: reason.to_string() };
    if path.file_name().is_none() || path.is_dir() {
        return Err(bad("is a directory"));
    }
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(bad("parent directory does not exist"));
    }
    if std::fs::metadata(parent).map(|m| m.permissions().readonly()).unwrap_or(true) {
        return Err(bad("parent directory is read-only"));
    }
    Ok(())
}

fn row_of(state: &State, cfg: &RunConfig, dt: f64, div_residual: f64) -> DiagnosticsRow {
    let nm = norms(state, &cfg.params);
    let e = energy(state, &cfg.params, cfg.energy_a);
    DiagnosticsRow {
        t: state.t,
        dt,
        mass: nm.mass,
        l2_n: nm.l2_n,
        linf_n: nm.linf_n,
        dev_inf: nm.dev_inf,
        grad_w_l2: nm.grad_w_l2,
        grad_w_l6: nm.grad_w_l6,
        grad_w_linf: nm.grad_w_linf,
        u_l2: nm.u_l2,
        u_linf: nm.u_linf,
        c_min: nm.c_min,
        c_max: nm.c_max,
        energy_f: e.f_value,
        div_residual,
        clamped_mass_cum: state.clamped_mass,
    }
}

/// Integrates to `t_end`, emitting a row at `t = 0`, at every multiple of
/// `output_every` and at `t_end`; then evaluates checks and fits and writes
/// the CSV if `out_path` is set.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    if let Some(path) = &cfg.out_path {
        validate_out_path(path)?;
    }
    let params = &cfg.params;
    let mut state = init_state(params)?;
    let constants = DerivedConstants::from_state(&state, params);

    let t_end = params.t_end;
    let mut rows = vec![row_of(&state, cfg, 0.0, divergence(&state.u).max_abs())];
    let mut trace = vec![StepSample::of(&state, cfg, 0.0)];
    let mut tick = 1u64;
    while state.t < t_end {
        let next = (tick as f64 * cfg.output_every).min(t_end);
        let mut last = None;
        while state.t < next {
            let report = advance(&mut state, params, &cfg.fluid, next)
                .map_err(|source| RunError::Step { t: state.t, source })?;
            trace.push(StepSample::of(&state, cfg, report.dt));
            last = Some(report);
        }
        // snap accumulated round-off onto the tick
        state.t = next;
        if let Some(report) = last {
            rows.push(row_of(&state, cfg, report.dt, report.div_residual));
        }
        tick += 1;
    }

    let fits = cfg
        .fits
        .iter()
        .map(|spec| {
            let window = cfg.fit_window();
            let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.get(&spec.column).unwrap_or(f64::NAN))).collect();
            FitResult { spec: spec.clone(), window, outcome: fit_decay(&series, spec.model, window) }
        })
        .collect();
    let checks = cfg
        .checks
        .iter()
        .map(|&kind| CheckResult { kind, outcome: evaluate_check(kind, cfg, &rows, &trace, &constants) })
        .collect();

    if let Some(path) = &cfg.out_path {
        csv::write_rows(path, &rows)?;
    }
    Ok(RunOutput { rows, trace, checks, fits, constants, final_state: state })
}

fn named(mut c: BoundCheck, kind: CheckKind) -> BoundCheck {
    c.name = kind.name().to_string();
    c
}

fn evaluate_check(
    kind: CheckKind,
    cfg: &RunConfig,
    rows: &[DiagnosticsRow],
    trace: &[StepSample],
    consts: &DerivedConstants,
) -> Result<BoundCheck, OracleError> {
    let window = cfg.check_window();
    let in_window = |t: f64| t >= window.0 && t <= window.1;
    let series = |f: fn(&DiagnosticsRow) -> f64| rows.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();
    let mu = cfg.params.mu;
    Ok(match kind {
        CheckKind::L1Bound => named(
            BoundCheck::upper("", rows.iter().map(|r| (r.mass, l1_decay_bound(consts, mu, r.t))), L1_SLACK),
            kind,
        ),
        CheckKind::NSandwich => {
            named(two_sided_algebraic_check(&series(|r| r.linf_n), window, SANDWICH_RATIO_CAP)?, kind)
        }
        CheckKind::GradWUpper => {
            named(upper_algebraic_check(&series(|r| r.grad_w_linf), window, GRADW_RATIO_CAP)?, kind)
        }
        CheckKind::GradWVanish => {
            let sq: Vec<f64> = rows.iter().map(|r| r.grad_w_l2 * r.grad_w_l2).collect();
            let peak = sq.iter().copied().fold(0.0, f64::max);
            let last = *sq.last().unwrap_or(&0.0);
            let ratio = if peak > 0.0 { last / peak } else { 0.0 };
            BoundCheck {
                name: kind.name().into(),
                satisfied_fraction: if ratio <= GRADW_VANISH_FRACTION { 1.0 } else { 0.0 },
                worst_violation: (ratio / GRADW_VANISH_FRACTION - 1.0).max(0.0),
                slack: 0.0,
                statistic: ratio,
            }
        }
        CheckKind::Positivity => {
            let clamp_cap = CLAMP_FRACTION * consts.mass0;
            let ok = |s: &StepSample| s.n_min >= 0.0 && s.w_min >= 0.0 && s.c_min > 0.0 && s.clamped_mass_cum <= clamp_cap;
            let good = trace.iter().filter(|s| ok(s)).count();
            let clamped = trace.last().map(|s| s.clamped_mass_cum).unwrap_or(0.0);
            let mut worst: f64 = (clamped / clamp_cap - 1.0).max(0.0);
            if trace.iter().any(|s| !(s.n_min >= 0.0 && s.w_min >= 0.0 && s.c_min > 0.0)) {
                worst = f64::INFINITY;
            }
            BoundCheck {
                name: kind.name().into(),
                satisfied_fraction: good as f64 / trace.len().max(1) as f64,
                worst_violation: worst,
                slack: 0.0,
                statistic: clamped / consts.mass0,
            }
        }
        CheckKind::MaxPrinciple => {
            let c0 = trace.first().map(|s| s.c_max).unwrap_or(1.0);
            let slack = MAX_PRINCIPLE_SLACK * c0;
            let incs: Vec<f64> = trace.windows(2).map(|p| p[1].c_max - p[0].c_max).collect();
            monotone_check(kind, &incs, slack, c0)
        }
        CheckKind::EnergyMonotone => {
            let incs: Vec<f64> = trace
                .windows(2)
                .filter(|p| in_window(p[0].t) && in_window(p[1].t))
                .map(|p| p[1].energy_f - p[0].energy_f)
                .collect();
            if incs.is_empty() {
                return Err(OracleError::EmptyWindow(window.0, window.1));
            }
            monotone_check(kind, &incs, ENERGY_INCREMENT, 1.0)
        }
    })
}

/// Increments must not exceed `limit`; violation is reported relative to
/// `scale`, and the statistic is the largest increment.
fn monotone_check(kind: CheckKind, incs: &[f64], limit: f64, scale: f64) -> BoundCheck {
    let largest = incs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let good = incs.iter().filter(|d| **d <= limit).count();
    BoundCheck {
        name: kind.name().into(),
        satisfied_fraction: if incs.is_empty() { 1.0 } else { good as f64 / incs.len() as f64 },
        worst_violation: ((largest - limit) / scale).max(0.0),
        slack: 0.0,
        statistic: largest,
    }
}
