//! The acceptance suite: ten numbered criteria evaluated on fixed scenarios.
//!
//! Reports contain no timings, so two runs of the suite render identically.

use super::config::CheckKind;
use super::run::{run, RunOutput};
use super::scenarios;
use super::sweep::{sweep_mu, SweepRow};
use crate::fluid::{project, FluidConfig};
use crate::grid::{divergence, gradient, laplacian, test_hooks, Bc, Grid, ScalarField, VectorField};
use crate::oracles::{fit_decay, logistic_solution, ode_comparison_bound, DecayModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cell::OnceCell;
use std::f64::consts::PI;
use std::fmt;

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "operator-convergence"),
    (2, "projection-exactness"),
    (3, "logistic-oracle"),
    (4, "positivity-max-principle"),
    (5, "l1-decay-bound"),
    (6, "exponential-stabilization"),
    (7, "energy-monotonicity"),
    (8, "algebraic-decay"),
    (9, "mu-sweep"),
    (10, "oracle-suite"),
];

/// Grids used for the operator convergence study.
pub const CONVERGENCE_GRIDS: [usize; 3] = [32, 64, 128];
pub const MIN_ORDER: f64 = 1.9;
pub const PROJECTION_RATIO: f64 = 1e-10;
pub const SWEEP_MUS: [f64; 4] = [0.5, 2.0, 8.0, 32.0];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

pub fn criterion_name(id: u8) -> Option<&'static str> {
    CRITERIA.iter().find(|(k, _)| *k == id).map(|(_, n)| *n)
}

/// Accumulates pass/fail over sub-checks and their descriptions.
struct Verdict {
    ok: bool,
    parts: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { ok: true, parts: Vec::new() }
    }

    fn check(&mut self, ok: bool, text: String) {
        self.ok &= ok;
        self.parts.push(if ok { text } else { format!("FAILED {text}") });
    }

    fn fail(&mut self, text: String) {
        self.check(false, text);
    }

    fn into_report(self, id: u8) -> CriterionReport {
        CriterionReport {
            id,
            name: criterion_name(id).unwrap_or("unknown"),
            passed: self.ok,
            detail: self.parts.join("; "),
        }
    }
}

/// Lazily computed scenario runs shared by several criteria.
#[derive(Default)]
pub struct Suite {
    logistic: OnceCell<Result<RunOutput, String>>,
    algebraic: OnceCell<Result<RunOutput, String>>,
    stabilization: OnceCell<Result<RunOutput, String>>,
    sweep: OnceCell<Result<Vec<SweepRow>, String>>,
    jobs: usize,
}

impl Suite {
    /// `jobs` is the thread count for the sweep.
    pub fn new(jobs: usize) -> Self {
        Self { jobs: jobs.max(1), ..Self::default() }
    }

    fn scenario<'a>(cell: &'a OnceCell<Result<RunOutput, String>>, name: &str) -> &'a Result<RunOutput, String> {
        cell.get_or_init(|| {
            let cfg = scenarios::by_name(name).expect("built-in scenario");
            run(&cfg).map_err(|e| format!("{name} run failed: {e}"))
        })
    }

    pub fn logistic(&self) -> &Result<RunOutput, String> {
        Self::scenario(&self.logistic, "logistic-uniform")
    }

    pub fn algebraic(&self) -> &Result<RunOutput, String> {
        Self::scenario(&self.algebraic, "algebraic-decay")
    }

    pub fn stabilization(&self) -> &Result<RunOutput, String> {
        Self::scenario(&self.stabilization, "stabilization")
    }

    pub fn sweep(&self) -> &Result<Vec<SweepRow>, String> {
        self.sweep.get_or_init(|| {
            sweep_mu(&scenarios::mu_sweep(), &SWEEP_MUS, self.jobs).map_err(|e| format!("sweep failed: {e}"))
        })
    }

    pub fn evaluate(&self, id: u8) -> CriterionReport {
        match id {
            1 => operator_convergence(),
            2 => projection_exactness(),
            3 => logistic_oracle(self),
            4 => positivity(self),
            5 => l1_decay(self),
            6 => stabilization(self),
            7 => energy_monotonicity(self),
            8 => algebraic_decay(self),
            9 => mu_sweep(self),
            10 => oracle_suite(),
            other => CriterionReport {
                id: other,
                name: "unknown",
                passed: false,
                detail: format!("no criterion {other}"),
            },
        }
    }
}

/// Runs the selected criteria (all when `only` is empty). With `canary`, the
/// Laplacian stencil is deliberately corrupted on the calling thread.
pub fn selftest(only: &[u8], jobs: usize, canary: bool) -> Vec<CriterionReport> {
    let ids: Vec<u8> = if only.is_empty() { CRITERIA.iter().map(|(k, _)| *k).collect() } else { only.to_vec() };
    let suite = Suite::new(jobs);
    let go = || ids.iter().map(|&id| suite.evaluate(id)).collect();
    if canary {
        test_hooks::with_flipped_laplacian(go)
    } else {
        go()
    }
}

pub fn render(reports: &[CriterionReport]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    s.push_str(&format!("{passed}/{} criteria passed\n", reports.len()));
    s
}

fn e(x: f64) -> String {
    // adding 0.0 turns -0 into 0
    format!("{:.3e}", x + 0.0)
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `f = cos(pi x) cos(pi y)` on the unit square is compatible with the
/// mirror closure; `v = (sin(pi x) cos(pi y), cos(pi x) sin(pi y))` has zero
/// normal component on the walls.
pub fn manufactured_errors(n: usize) -> (f64, f64, f64) {
    let g = Grid::square(n, 1.0).expect("valid grid");
    let f = ScalarField::from_fn(g, Bc::Neumann, |x, y| (PI * x).cos() * (PI * y).cos());
    let lap_exact = ScalarField::from_fn(g, Bc::Neumann, |x, y| -2.0 * PI * PI * (PI * x).cos() * (PI * y).cos());
    let lap = max_err(&laplacian(&f).values, &lap_exact.values);

    let grad_exact = VectorField::from_fn(
        g,
        |x, y| -PI * (PI * x).sin() * (PI * y).cos(),
        |x, y| -PI * (PI * x).cos() * (PI * y).sin(),
    );
    let gr = gradient(&f);
    let grad = max_err(&gr.u1, &grad_exact.u1).max(max_err(&gr.u2, &grad_exact.u2));

    let v = VectorField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).cos(), |x, y| (PI * x).cos() * (PI * y).sin());
    let div_exact = ScalarField::from_fn(g, Bc::Neumann, |x, y| 2.0 * PI * (PI * x).cos() * (PI * y).cos());
    let div = max_err(&divergence(&v).values, &div_exact.values);
    (lap, grad, div)
}

fn operator_convergence() -> CriterionReport {
    let errs: Vec<(f64, f64, f64)> = CONVERGENCE_GRIDS.iter().map(|&n| manufactured_errors(n)).collect();
    let mut v = Verdict::new();
    for (name, pick) in [
        ("laplacian", (|t: &(f64, f64, f64)| t.0) as fn(&(f64, f64, f64)) -> f64),
        ("gradient", |t| t.1),
        ("divergence", |t| t.2),
    ] {
        let series: Vec<f64> = errs.iter().map(pick).collect();
        let ord = orders(&series);
        let worst = ord.iter().copied().fold(f64::INFINITY, f64::min);
        let ok = worst >= MIN_ORDER;
        v.check(ok, format!("{name} order {:.3} (errors {})", worst, series.iter().map(|x| e(*x)).collect::<Vec<_>>().join(", ")));
    }
    v.into_report(1)
}

/// Random interior face values in `[-1, 1]`, walls zeroed.
pub fn random_field(grid: Grid, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = VectorField::zeros(grid);
    v.u1.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    v.u2.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    v.enforce_no_slip();
    v
}

fn projection_exactness() -> CriterionReport {
    let g = Grid::square(64, 1.0).expect("valid grid");
    let v_in = random_field(g, 7);
    let mut v = Verdict::new();
    match project(&v_in, &FluidConfig::default()) {
        Ok(p) => {
            let ratio = divergence(&p.velocity).max_abs() / divergence(&v_in).max_abs();
            v.check(ratio <= PROJECTION_RATIO, format!("||div u|| / ||div v|| = {} (limit {})", e(ratio), e(PROJECTION_RATIO)));
        }
        Err(err) => v.fail(format!("projection failed: {err}")),
    }
    v.into_report(2)
}

fn logistic_oracle(s: &Suite) -> CriterionReport {
    let mut v = Verdict::new();
    match s.logistic() {
        Ok(out) => {
            let area = out.final_state.grid().area();
            match out.rows.iter().find(|r| (r.t - 1.0).abs() < 1e-9) {
                Some(row) => {
                    let exact = logistic_solution(0.5, 1.0, 1.0, 1.0);
                    let err = (row.mass / area - exact).abs();
                    v.check(err <= 1e-3, format!("|mean n(1) - exact| = {} (limit 1e-3)", e(err)));
                }
                None => v.fail("no output row at t = 1".into()),
            }
            let dt_max = out.trace.iter().map(|t| t.dt).fold(0.0, f64::max);
            v.check(dt_max <= 1e-3 * (1.0 + 1e-9), format!("max dt {}", e(dt_max)));
            let spread = out.trace.iter().map(|t| t.n_max - t.n_min).fold(0.0, f64::max);
            v.check(spread <= 1e-12, format!("max spatial spread {} (limit 1e-12)", e(spread)));
        }
        Err(err) => v.fail(err.clone()),
    }
    v.into_report(3)
}

fn positivity(s: &Suite) -> CriterionReport {
    let mut v = Verdict::new();
    for (name, out) in [
        ("logistic-uniform", s.logistic()),
        ("algebraic-decay", s.algebraic()),
        ("stabilization", s.stabilization()),
    ] {
        match out {
            Ok(out) => {
                let pos = out.check(CheckKind::Positivity);
                let mp = out.check(CheckKind::MaxPrinciple);
                let n_min = out.trace.iter().map(|t| t.n_min).fold(f64::INFINITY, f64::min);
                let w_min = out.trace.iter().map(|t| t.w_min).fold(f64::INFINITY, f64::min);
                let c_min = out.trace.iter().map(|t| t.c_min).fold(f64::INFINITY, f64::min);
                let ok = pos.is_some_and(|c| c.passed()) && mp.is_some_and(|c| c.passed());
                let clamp = out.trace.last().map(|t| t.clamped_mass_cum).unwrap_or(0.0) / out.constants.mass0;
                let c_inc = mp.and_then(|c| c.outcome.as_ref().ok()).map(|c| c.statistic).unwrap_or(f64::NAN);
                v.check(
                    ok,
                    format!(
                        "{name}: min n {} min w {} min c {} clamped {} max c_max step {}",
                        e(n_min),
                        e(w_min),
                        e(c_min),
                        e(clamp),
                        e(c_inc)
                    ),
                );
            }
            Err(err) => v.fail(err.clone()),
        }
    }
    match s.sweep() {
        Ok(rows) => {
            let failed: Vec<String> = rows
                .iter()
                .filter(|r| !r.failed_checks.is_empty() || !r.completed)
                .map(|r| format!("mu={} {}", r.mu, r.failed_checks.join(",")))
                .collect();
            v.check(failed.is_empty(), format!("mu-sweep: {} runs, failures [{}]", rows.len(), failed.join("; ")));
        }
        Err(err) => v.fail(err.clone()),
    }
    v.into_report(4)
}

fn l1_decay(s: &Suite) -> CriterionReport {
    let mut v = Verdict::new();
    match s.algebraic() {
        Ok(out) => match out.check(CheckKind::L1Bound).map(|c| &c.outcome) {
            Some(Ok(c)) => v.check(
                c.passed(),
                format!(
                    "max mass / bound = {:.6} over {} rows (limit 1.05)",
                    c.statistic,
                    out.rows.len()
                ),
            ),
            Some(Err(err)) => v.fail(err.to_string()),
            None => v.fail("l1-bound check not configured".into()),
        },
        Err(err) => v.fail(err.clone()),
    }
    v.into_report(5)
}

fn stabilization(s: &Suite) -> CriterionReport {
    let mut v = Verdict::new();
    match s.stabilization() {
        Ok(out) => {
            let last = out.rows.last().map(|r| r.dev_inf).unwrap_or(f64::NAN);
            v.check(last <= 1e-3, format!("final dev_inf {} (limit 1e-3)", e(last)));
            for (column, min_rate, min_r2) in [("dev_inf", 0.05, 0.95), ("grad_w_l6", 0.0, 0.0), ("u_linf", 0.0, 0.0)] {
                match out.fit(column).map(|f| &f.outcome) {
                    Some(Ok(fit)) => {
                        let ok = fit.rate > min_rate && fit.r_squared >= min_r2;
                        v.check(ok, format!("{column} rate {:.4} r2 {:.4}", fit.rate, fit.r_squared));
                    }
                    Some(Err(err)) => v.fail(format!("{column} fit: {err}")),
                    None => v.fail(format!("{column} fit not configured")),
                }
            }
        }
        Err(err) => v.fail(err.clone()),
    }
    v.into_report(6)
}

fn energy_monotonicity(s: &Suite) -> CriterionReport {
    let mut v = Verdict::new();
    match s.stabilization() {
        Ok(out) => match out.check(CheckKind::EnergyMonotone).map(|c| &c.outcome) {
            Some(Ok(c)) => v.check(c.passed(), format!("largest step increment on [10, 30] {} (limit 1e-6)", e(c.statistic))),
            Some(Err(err)) => v.fail(err.to_string()),
            None => v.fail("energy-monotone check not configured".into()),
        },
        Err(err) => v.fail(err.clone()),
    }
    v.into_report(7)
}

fn algebraic_decay(s: &Suite) -> CriterionReport {
    let mut v = Verdict::new();
    match s.algebraic() {
        Ok(out) => {
            match out.fit("linf_n").map(|f| &f.outcome) {
                Some(Ok(fit)) => v.check(
                    (0.75..=1.25).contains(&fit.rate) && fit.r_squared >= 0.9,
                    format!("||n||_inf exponent {:.4} r2 {:.4}", fit.rate, fit.r_squared),
                ),
                Some(Err(err)) => v.fail(format!("||n||_inf fit: {err}")),
                None => v.fail("linf_n fit not configured".into()),
            }
            for (kind, label) in [
                (CheckKind::NSandwich, "||n||_inf (t+1) ratio"),
                (CheckKind::GradWUpper, "||grad w||_inf (t+1) growth"),
                (CheckKind::GradWVanish, "final/peak int |grad w|^2"),
            ] {
                match out.check(kind).map(|c| &c.outcome) {
                    Some(Ok(c)) => v.check(c.passed(), format!("{label} {}", e(c.statistic))),
                    Some(Err(err)) => v.fail(format!("{label}: {err}")),
                    None => v.fail(format!("{kind} not configured")),
                }
            }
            match out.fit("c_max").map(|f| &f.outcome) {
                Some(Ok(fit)) => v.check(fit.rate > 0.0, format!("c_max exponent {:.4}", fit.rate)),
                Some(Err(err)) => v.fail(format!("c_max fit: {err}")),
                None => v.fail("c_max fit not configured".into()),
            }
            let c_min = out.rows.iter().map(|r| r.c_min).fold(f64::INFINITY, f64::min);
            v.check(c_min > 0.0, format!("min c {}", e(c_min)));
        }
        Err(err) => v.fail(err.clone()),
    }
    v.into_report(8)
}

fn mu_sweep(s: &Suite) -> CriterionReport {
    let mut v = Verdict::new();
    match s.sweep() {
        Ok(rows) => {
            for r in rows {
                let text = match (r.final_dev_inf, &r.error) {
                    (Some(d), _) => format!("mu={} dev_inf {}", r.mu, e(d)),
                    (None, Some(err)) => format!("mu={} {err}", r.mu),
                    (None, None) => format!("mu={} no result", r.mu),
                };
                v.check(r.completed && r.bounded, text);
            }
            let tail: Vec<f64> = rows.iter().filter(|r| r.mu >= 2.0).filter_map(|r| r.final_dev_inf).collect();
            let monotone = tail.len() == 3 && tail.windows(2).all(|w| w[1] <= w[0]);
            v.check(monotone, "dev_inf nonincreasing over mu = 2, 8, 32".into());
        }
        Err(err) => v.fail(err.clone()),
    }
    v.into_report(9)
}

/// Brute-force solution of `y' + a y = h` with `h = 3` on the first third of
/// every unit interval, so each unit window of `h` integrates to `b = 1`.
fn comparison_ode_holds(a: f64, y0: f64) -> bool {
    let dt = 1e-4;
    let (mut y, mut t): (f64, f64) = (y0, 0.0);
    while t < 20.0 {
        let h = if (t + 0.5 * dt).fract() < 1.0 / 3.0 { 3.0 } else { 0.0 };
        let decay = (-a * dt).exp();
        y = y * decay + h / a * (1.0 - decay);
        t += dt;
        if y > ode_comparison_bound(y0, a, 1.0, t, 0.0) + 1e-12 {
            return false;
        }
    }
    true
}

fn oracle_suite() -> CriterionReport {
    let mut v = Verdict::new();

    let mut worst: f64 = 0.0;
    for &(n0, r, mu) in &[(0.5, 1.0, 1.0), (2.0, 1.0, 20.0), (1.0, 0.0, 1.0), (3.0, -0.5, 2.0)] {
        for k in 0..50 {
            let t = 0.1 + 0.2 * k as f64;
            let h = 1e-5;
            let d = (logistic_solution(n0, r, mu, t + h) - logistic_solution(n0, r, mu, t - h)) / (2.0 * h);
            let y = logistic_solution(n0, r, mu, t);
            let rhs = r * y - mu * y * y;
            let scale = rhs.abs().max(1e-3 * y);
            worst = worst.max((d - rhs).abs() / scale);
        }
    }
    v.check(worst <= 1e-6, format!("logistic ODE residual {}", e(worst)));
    let t20 = (logistic_solution(0.5, 1.0, 1.0, 20.0) - 1.0).abs();
    v.check(t20 <= 1e-8, format!("logistic(20) - 1 = {}", e(t20)));

    let cmp = [(1.0, 5.0), (0.3, 0.0), (2.5, 1.0)].iter().all(|&(a, y0)| comparison_ode_holds(a, y0));
    let a = 0.7;
    let far = (ode_comparison_bound(2.0, a, 0.4, 100.0 / a, 0.0) - 0.4 / (1.0 - (-a).exp())).abs();
    v.check(cmp && far <= 1e-6, format!("comparison bound dominates synthetic ODE; limit gap {}", e(far)));

    let sample = |f: &dyn Fn(f64) -> f64, t1: f64, dt: f64| {
        let n = (t1 / dt).round() as usize;
        (0..=n).map(|k| (k as f64 * dt, f(k as f64 * dt))).collect::<Vec<_>>()
    };
    let exp = fit_decay(&sample(&|t| 5.0 * (-0.3 * t).exp(), 20.0, 0.1), DecayModel::Exponential, (0.0, 20.0));
    let alg = fit_decay(&sample(&|t| 2.0 / (t + 1.0), 60.0, 0.5), DecayModel::Algebraic, (5.0, 50.0));
    let flat = fit_decay(&sample(&|_| 4.2, 10.0, 0.5), DecayModel::Exponential, (0.0, 10.0));
    match (exp, alg, flat) {
        (Ok(x), Ok(y), Ok(z)) => {
            let ok = (x.rate - 0.3).abs() <= 1e-10
                && (x.r_squared - 1.0).abs() <= 1e-12
                && (y.rate - 1.0).abs() <= 1e-10
                && z.rate.abs() <= 1e-14
                && z.r_squared == 1.0;
            v.check(
                ok,
                format!(
                    "fit errors: exp {} alg {} flat {}",
                    e((x.rate - 0.3).abs()),
                    e((y.rate - 1.0).abs()),
                    e(z.rate.abs())
                ),
            );
        }
        (x, y, z) => v.fail(format!("fit failed: {:?} {:?} {:?}", x.err(), y.err(), z.err())),
    }
    v.into_report(10)
}
