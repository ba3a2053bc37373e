//! Population and signal stepping in the desingularized variables.
//!
//! The signal `c` is carried as `w = -ln(c / max c0)`, which turns the
//! singular sensitivity `(n / c) grad c` into the regular flux `n grad w` and
//! adds a `-|grad w|^2` sink to the signal equation:
//!
//! ```text
//! n_t + u.grad n = lap n + chi div(n grad w) + n (r - mu n)
//! w_t + u.grad w = lap w - |grad w|^2 + n
//! ```
//!
//! Each step handles `n`, then `w` (using the new `n`), then the fluid. Every
//! scalar update is explicit in transport/reaction and backward Euler in
//! diffusion. Negative densities left by the explicit logistic sink are
//! clamped to zero and the removed mass is accumulated on the state.

use crate::fluid::{step_fluid, FluidConfig, FluidError};
use crate::grid::{advect, chemotaxis_flux_div, grad_sq_cells, laplacian_into, Bc, Grid, GridError, ScalarField, VectorField};
use crate::linsolve::{pcg, ScalarHelmholtz, SolveError, SolverSettings};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Relative tolerance of the implicit scalar diffusion solves.
pub const DIFFUSION_TOL: f64 = 1e-10;
/// Guard factor for the blow-up detector.
pub const BLOWUP_FACTOR: f64 = 1e6;
const DT_EPS: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("chi must be positive, got {0}")]
    Chi(f64),
    #[error("mu must be positive, got {0}")]
    Mu(f64),
    #[error("r must be finite, got {0}")]
    Growth(f64),
    #[error("dt_safety must lie in (0, 1], got {0}")]
    DtSafety(f64),
    #[error("dt_max must be positive, got {0}")]
    DtMax(f64),
    #[error("t_end must be nonnegative, got {0}")]
    TEnd(f64),
    #[error("gravity must be finite")]
    Gravity,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("unknown initial-data preset '{0}' (expected uniform, gauss-bump, two-bump or vortex-fluid)")]
    UnknownPreset(String),
    #[error("initial signal amplitude must be positive, got {0}")]
    SignalAmplitude(f64),
    #[error("signal tilt must lie in [0, 1), got {0}")]
    SignalTilt(f64),
    #[error("initial density must be nonnegative with positive mass")]
    Density,
    #[error(transparent)]
    Params(#[from] ParamError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("time step must be positive and finite, got {0}")]
    BadDt(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error("possible blow-up at t = {t}: ||n||_inf = {n_inf:.6e} exceeds guard {limit:.6e}")]
    BlowUp { t: f64, n_inf: f64, limit: f64 },
    #[error("non-finite value in {field} at t = {t}")]
    NonFinite { field: &'static str, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Uniform,
    GaussBump,
    TwoBump,
    VortexFluid,
}

impl FromStr for Preset {
    type Err = InitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "gauss-bump" => Ok(Self::GaussBump),
            "two-bump" => Ok(Self::TwoBump),
            "vortex-fluid" => Ok(Self::VortexFluid),
            other => Err(InitError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::GaussBump => "gauss-bump",
            Self::TwoBump => "two-bump",
            Self::VortexFluid => "vortex-fluid",
        })
    }
}

/// Initial-data descriptor.
///
/// * `uniform`: `n0 = n_base`, `c0 = c_amp`, `u0 = 0`.
/// * `gauss-bump`: `n0 = n_base + n_amp exp(-|x - x1|^2 / 2 s^2)` with
///   `x1 = (0.35 lx, 0.6 ly)` and `s = sigma_frac min(lx, ly)`;
///   `c0 = c_amp (1 - c_tilt x / lx)`; `u0 = 0`.
/// * `two-bump`: as `gauss-bump` plus a second bump at `(0.7 lx, 0.3 ly)`.
/// * `vortex-fluid`: `gauss-bump` data with a single no-slip vortex of peak
///   speed about `u_amp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub preset: Preset,
    pub n_base: f64,
    pub n_amp: f64,
    pub sigma_frac: f64,
    pub c_amp: f64,
    pub c_tilt: f64,
    pub u_amp: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            preset: Preset::GaussBump,
            n_base: 1.0,
            n_amp: 2.0,
            sigma_frac: 0.12,
            c_amp: 1.0,
            c_tilt: 0.5,
            u_amp: 0.5,
        }
    }
}

impl InitSpec {
    pub fn uniform(n: f64) -> Self {
        Self {
            preset: Preset::Uniform,
            n_base: n,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub chi: f64,
    pub r: f64,
    pub mu: f64,
    /// Constant `grad phi`.
    pub gravity: [f64; 2],
    pub grid: Grid,
    pub dt_safety: f64,
    /// Upper bound on the raw step before the safety factor is applied.
    pub dt_max: f64,
    pub t_end: f64,
    pub init: InitSpec,
}

impl SimParams {
    pub fn new(grid: Grid) -> Self {
        Self {
            chi: 0.5,
            r: 1.0,
            mu: 1.0,
            gravity: [0.0, -1.0],
            grid,
            dt_safety: 0.4,
            dt_max: 0.1,
            t_end: 1.0,
            init: InitSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(ParamError::Chi(self.chi));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(ParamError::Mu(self.mu));
        }
        if !self.r.is_finite() {
            return Err(ParamError::Growth(self.r));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(ParamError::DtSafety(self.dt_safety));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(ParamError::DtMax(self.dt_max));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(ParamError::TEnd(self.t_end));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(ParamError::Gravity);
        }
        Ok(())
    }

    /// Positive part of the growth rate over `mu`: the attracting density level.
    pub fn equilibrium(&self) -> f64 {
        self.r.max(0.0) / self.mu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub n: ScalarField,
    pub w: ScalarField,
    pub u: VectorField,
    pub p: ScalarField,
    /// `max c0`, used to map `w` back to `c`.
    pub c0_max: f64,
    /// `max n0`, used by the blow-up guard.
    pub n0_max: f64,
    /// Mass removed by positivity clamping so far.
    pub clamped_mass: f64,
}

impl State {
    pub fn grid(&self) -> Grid {
        self.n.grid
    }
}

/// Builds `(n0, c0, u0)` from the preset and converts `c0` to `w0`.
pub fn init_state(params: &SimParams) -> Result<State, InitError> {
    params.validate()?;
    let spec = params.init;
    let g = params.grid;
    if !(spec.c_amp > 0.0 && spec.c_amp.is_finite()) {
        return Err(InitError::SignalAmplitude(spec.c_amp));
    }
    if !(0.0..1.0).contains(&spec.c_tilt) {
        return Err(InitError::SignalTilt(spec.c_tilt));
    }
    let (lx, ly) = (g.lx(), g.ly());
    let s2 = 2.0 * (spec.sigma_frac * lx.min(ly)).powi(2);
    let bump = move |x: f64, y: f64, cx: f64, cy: f64| {
        let d2 = (x - cx * lx).powi(2) + (y - cy * ly).powi(2);
        (-d2 / s2).exp()
    };

    let (n, c) = match spec.preset {
        Preset::Uniform => (
            ScalarField::constant(g, Bc::Neumann, spec.n_base),
            ScalarField::constant(g, Bc::Neumann, spec.c_amp),
        ),
        Preset::GaussBump | Preset::VortexFluid | Preset::TwoBump => {
            let two = spec.preset == Preset::TwoBump;
            let n = ScalarField::from_fn(g, Bc::Neumann, |x, y| {
                let mut v = spec.n_base + spec.n_amp * bump(x, y, 0.35, 0.6);
                if two {
                    v += spec.n_amp * bump(x, y, 0.7, 0.3);
                }
                v
            });
            let c = ScalarField::from_fn(g, Bc::Neumann, |x, _| spec.c_amp * (1.0 - spec.c_tilt * x / lx));
            (n, c)
        }
    };
    if n.values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || n.integral() <= 0.0 {
        return Err(InitError::Density);
    }

    let u = if spec.preset == Preset::VortexFluid {
        let amp = spec.u_amp * lx.min(ly) / PI;
        VectorField::from_stream_function(g, move |x, y| {
            amp * (PI * x / lx).sin().powi(2) * (PI * y / ly).sin().powi(2)
        })
    } else {
        VectorField::zeros(g)
    };

    let c0_max = c.max();
    let w = ScalarField::with_values(g, Bc::Neumann, c.values.iter().map(|v| -(v / c0_max).ln()).collect());
    let n0_max = n.max();
    Ok(State {
        t: 0.0,
        n,
        w,
        u,
        p: ScalarField::zeros(g, Bc::Neumann),
        c0_max,
        n0_max,
        clamped_mass: 0.0,
    })
}

/// `c = max c0 * exp(-w)`.
pub fn recover_c(state: &State) -> ScalarField {
    let c0 = state.c0_max;
    ScalarField::with_values(
        state.grid(),
        Bc::Neumann,
        state.w.values.iter().map(|w| c0 * (-w).exp()).collect(),
    )
}

/// The individual stability limits that [`cfl_dt`] takes the minimum of,
/// before the safety factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtCandidates {
    pub velocity_x: f64,
    pub velocity_y: f64,
    pub drift_x: f64,
    pub drift_y: f64,
    pub reaction: f64,
    pub dt_max: f64,
}

impl DtCandidates {
    pub fn min(&self) -> f64 {
        [self.velocity_x, self.velocity_y, self.drift_x, self.drift_y, self.reaction, self.dt_max]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

fn ratio(h: f64, speed: f64) -> f64 {
    if speed > 0.0 {
        h / speed
    } else {
        f64::INFINITY
    }
}

pub fn dt_candidates(state: &State, params: &SimParams) -> DtCandidates {
    let g = state.grid();
    let gw = crate::grid::gradient(&state.w);
    DtCandidates {
        velocity_x: ratio(g.dx(), state.u.max_abs_u1()),
        velocity_y: ratio(g.dy(), state.u.max_abs_u2()),
        drift_x: ratio(g.dx(), params.chi * gw.max_abs_u1()),
        drift_y: ratio(g.dy(), params.chi * gw.max_abs_u2()),
        reaction: 1.0 / (params.r.abs() + 2.0 * params.mu * state.n.max_abs() + DT_EPS),
        dt_max: params.dt_max,
    }
}

/// Stable explicit step: `dt_safety` times the smallest transport, drift and
/// reaction limit, capped by `dt_max`.
pub fn cfl_dt(state: &State, params: &SimParams) -> f64 {
    params.dt_safety * dt_candidates(state, params).min()
}

/// Backward-Euler diffusion in correction form: `(I - dt L) d = dt L f`.
fn implicit_diffusion(f: &ScalarField, dt: f64) -> Result<ScalarField, SolveError> {
    let g = f.grid;
    let op = ScalarHelmholtz { grid: g, bc: f.bc, dt };
    let mut rhs = vec![0.0; g.cells()];
    laplacian_into(&f.values, g, f.bc, &mut rhs);
    rhs.iter_mut().for_each(|v| *v *= dt);
    let mut corr = vec![0.0; g.cells()];
    pcg(
        &op,
        &rhs,
        &mut corr,
        SolverSettings { tol: DIFFUSION_TOL, max_iter: 10 * g.cells() },
    )?;
    let mut out = f.clone();
    for (v, c) in out.values.iter_mut().zip(&corr) {
        *v += c;
    }
    Ok(out)
}

/// Zeroes negative entries and returns the removed mass.
fn clamp_nonnegative(f: &mut ScalarField) -> f64 {
    let mut removed = 0.0;
    for v in f.values.iter_mut() {
        if *v < 0.0 {
            removed -= *v;
            *v = 0.0;
        }
    }
    removed * f.grid.cell_area()
}

/// Bookkeeping from one coupled step, enough to audit the discrete balance
/// laws for mass and for `int w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    /// `r int n - mu int n^2` at the start of the step.
    pub mass_rate: f64,
    pub w_mass_before: f64,
    pub w_mass_after: f64,
    /// `-int |grad w|^2` at the start of the step plus `int n` at the end.
    pub w_mass_rate: f64,
    pub clamped_n: f64,
    pub clamped_w: f64,
    pub div_residual: f64,
    pub poisson_iterations: usize,
}

/// Advances `state` by `dt`. On error the state is left untouched.
pub fn step_system(
    state: &mut State,
    params: &SimParams,
    fluid: &FluidConfig,
    dt: f64,
) -> Result<StepReport, StepError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StepError::BadDt(dt));
    }
    let g = state.grid();
    let area = g.cell_area();
    let (r, mu) = (params.r, params.mu);

    // population
    let n = &state.n;
    let mass_before = n.integral();
    let n_sq = n.values.iter().map(|v| v * v).sum::<f64>() * area;
    let adv = advect(n, &state.u)?;
    let chemo = chemotaxis_flux_div(n, &state.w, params.chi)?;
    let mut n_star = n.clone();
    for (k, v) in n_star.values.iter_mut().enumerate() {
        let nk = n.values[k];
        *v = nk + dt * (-adv.values[k] + chemo.values[k] + nk * (r - mu * nk));
    }
    let mut n_new = implicit_diffusion(&n_star, dt)?;
    let clamped_n = clamp_nonnegative(&mut n_new);
    if !n_new.is_finite() {
        return Err(StepError::NonFinite { field: "n", t: state.t + dt });
    }
    let limit = BLOWUP_FACTOR * (state.n0_max + r.abs() / mu + 1.0);
    let n_inf = n_new.max_abs();
    if n_inf > limit {
        return Err(StepError::BlowUp { t: state.t + dt, n_inf, limit });
    }

    // signal
    let w = &state.w;
    let w_mass_before = w.integral();
    let gsq = grad_sq_cells(w);
    let adv_w = advect(w, &state.u)?;
    let mut w_star = w.clone();
    for (k, v) in w_star.values.iter_mut().enumerate() {
        *v = w.values[k] + dt * (-adv_w.values[k] - gsq.values[k] + n_new.values[k]);
    }
    let mut w_new = implicit_diffusion(&w_star, dt)?;
    let clamped_w = clamp_nonnegative(&mut w_new);
    if !w_new.is_finite() {
        return Err(StepError::NonFinite { field: "w", t: state.t + dt });
    }
    let w_mass_rate = -gsq.integral() + n_new.integral();

    // fluid, driven by the updated density
    let mut scratch = state.clone();
    scratch.n = n_new;
    let fl = step_fluid(&scratch, params, fluid, dt)?;
    if !fl.velocity.is_finite() {
        return Err(StepError::NonFinite { field: "u", t: state.t + dt });
    }

    let mass_after = scratch.n.integral();
    state.n = scratch.n;
    state.w = w_new;
    state.u = fl.velocity;
    state.p = fl.pressure;
    state.t += dt;
    state.clamped_mass += clamped_n;

    Ok(StepReport {
        dt,
        mass_before,
        mass_after,
        mass_rate: r * mass_before - mu * n_sq,
        w_mass_before,
        w_mass_after: state.w.integral(),
        w_mass_rate,
        clamped_n,
        clamped_w,
        div_residual: fl.div_residual,
        poisson_iterations: fl.poisson.iterations,
    })
}

/// Advances by the step chosen by [`cfl_dt`], never past `t_limit`.
pub fn advance(
    state: &mut State,
    params: &SimParams,
    fluid: &FluidConfig,
    t_limit: f64,
) -> Result<StepReport, StepError> {
    let mut dt = cfl_dt(state, params);
    let remaining = t_limit - state.t;
    // absorb a sliver so the final step does not become vanishingly small
    if remaining <= dt * (1.0 + 1e-9) {
        dt = remaining;
    }
    step_system(state, params, fluid, dt)
}
