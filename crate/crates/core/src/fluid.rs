//! Incompressible (Navier-)Stokes stepping on the MAC grid with buoyancy
//! forcing, closed by a discrete Helmholtz projection.
//!
//! One step is: explicit upwind convection, backward-Euler viscous diffusion
//! (unit viscosity), explicit buoyancy, then projection onto discretely
//! divergence-free fields. Gravity is constant, so the buoyancy of the mean
//! density is an exact discrete gradient; it is folded into the pressure and
//! only the density fluctuation drives the flow.

use crate::chemo::{SimParams, State};
use crate::grid::{divergence, gradient_into, Bc, Grid, ScalarField, VectorField};
use crate::linsolve::{pcg, Component, NeumannPoisson, SolveError, SolveStats, SolverSettings, SpdOperator, VelocityHelmholtz};
use thiserror::Error;

pub const DEFAULT_POISSON_TOL: f64 = 1e-10;
pub const VISCOUS_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluidError {
    #[error("poisson_tol must lie in (0, 1e-6], got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidConfig {
    /// Navier-Stokes when set, Stokes otherwise.
    pub include_convection: bool,
    pub poisson_tol: f64,
    /// Iteration cap; `None` means `10 * nx * ny`.
    pub poisson_max_iter: Option<usize>,
}

impl Default for FluidConfig {
    fn default() -> Self {
        Self {
            include_convection: true,
            poisson_tol: DEFAULT_POISSON_TOL,
            poisson_max_iter: None,
        }
    }
}

impl FluidConfig {
    pub fn validate(&self) -> Result<(), FluidError> {
        if !(self.poisson_tol > 0.0 && self.poisson_tol <= 1e-6) {
            return Err(FluidError::BadTolerance(self.poisson_tol));
        }
        Ok(())
    }

    fn settings(&self, grid: &Grid, tol: f64) -> SolverSettings {
        SolverSettings {
            tol,
            max_iter: self.poisson_max_iter.unwrap_or(10 * grid.cells()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub velocity: VectorField,
    /// Zero-mean potential `q` with `velocity = v - grad q`.
    pub potential: ScalarField,
    pub stats: SolveStats,
}

/// Discrete Helmholtz projection: solves `L q = div v` (Neumann, zero mean)
/// and returns `v - grad q`.
pub fn project(v: &VectorField, cfg: &FluidConfig) -> Result<Projection, FluidError> {
    cfg.validate()?;
    let g = v.grid;
    let div = divergence(v);
    // -L q = -div v keeps the operator positive semi-definite.
    let rhs: Vec<f64> = div.values.iter().map(|d| -d).collect();
    let mut q = vec![0.0; g.cells()];
    let stats = pcg(&NeumannPoisson { grid: g }, &rhs, &mut q, cfg.settings(&g, cfg.poisson_tol))?;
    let mut gx = vec![0.0; g.x_faces()];
    let mut gy = vec![0.0; g.y_faces()];
    gradient_into(&q, g, &mut gx, &mut gy);
    let mut out = v.clone();
    for (a, b) in out.u1.iter_mut().zip(&gx) {
        *a -= b;
    }
    for (a, b) in out.u2.iter_mut().zip(&gy) {
        *a -= b;
    }
    out.enforce_no_slip();
    Ok(Projection {
        velocity: out,
        potential: ScalarField::with_values(g, Bc::Neumann, q),
        stats,
    })
}

/// Upwind `(u . grad) u` evaluated on the faces of each component.
pub fn convection(u: &VectorField) -> VectorField {
    let g = u.grid;
    let (nx, ny, dx, dy) = (g.nx(), g.ny(), g.dx(), g.dy());
    let mut out = VectorField::zeros(g);
    let a1 = &u.u1;
    let a2 = &u.u2;
    for j in 0..ny {
        for i in 1..nx {
            let k = g.xface(i, j);
            let c = a1[k];
            let v = 0.25
                * (a2[g.yface(i - 1, j)] + a2[g.yface(i, j)] + a2[g.yface(i - 1, j + 1)] + a2[g.yface(i, j + 1)]);
            let ddx = if c > 0.0 { (c - a1[k - 1]) / dx } else { (a1[k + 1] - c) / dx };
            let below = if j > 0 { a1[g.xface(i, j - 1)] } else { -c };
            let above = if j + 1 < ny { a1[g.xface(i, j + 1)] } else { -c };
            let ddy = if v > 0.0 { (c - below) / dy } else { (above - c) / dy };
            out.u1[k] = c * ddx + v * ddy;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let k = g.yface(i, j);
            let c = a2[k];
            let w = 0.25
                * (a1[g.xface(i, j - 1)] + a1[g.xface(i + 1, j - 1)] + a1[g.xface(i, j)] + a1[g.xface(i + 1, j)]);
            let ddy = if c > 0.0 { (c - a2[k - nx]) / dy } else { (a2[k + nx] - c) / dy };
            let left = if i > 0 { a2[k - 1] } else { -c };
            let right = if i + 1 < nx { a2[k + 1] } else { -c };
            let ddx = if w > 0.0 { (c - left) / dx } else { (right - c) / dx };
            out.u2[k] = w * ddx + c * ddy;
        }
    }
    out
}

/// Buoyancy `(n - mean n) g` averaged onto interior faces.
pub fn buoyancy(n: &ScalarField, gravity: [f64; 2]) -> VectorField {
    let g = n.grid;
    let mean = n.mean();
    let mut f = VectorField::zeros(g);
    for j in 0..g.ny() {
        for i in 1..g.nx() {
            let face = 0.5 * (n.at(i - 1, j) + n.at(i, j)) - mean;
            f.u1[g.xface(i, j)] = gravity[0] * face;
        }
    }
    for j in 1..g.ny() {
        for i in 0..g.nx() {
            let face = 0.5 * (n.at(i, j - 1) + n.at(i, j)) - mean;
            f.u2[g.yface(i, j)] = gravity[1] * face;
        }
    }
    f
}

/// Backward-Euler viscous step in correction form:
/// `(I - dt L) d = dt L u`, returning `u + d`.
pub fn implicit_viscous(u: &VectorField, dt: f64, cfg: &FluidConfig) -> Result<(VectorField, usize), FluidError> {
    let g = u.grid;
    let settings = cfg.settings(&g, VISCOUS_TOL);
    let mut out = u.clone();
    let mut iters = 0;
    for (component, src, dst) in [
        (Component::X, &u.u1, &mut out.u1),
        (Component::Y, &u.u2, &mut out.u2),
    ] {
        let op = VelocityHelmholtz { grid: g, component, dt };
        let mut rhs = vec![0.0; op.len()];
        op.laplacian(src, &mut rhs);
        rhs.iter_mut().for_each(|v| *v *= dt);
        let mut corr = vec![0.0; op.len()];
        iters += pcg(&op, &rhs, &mut corr, settings)?.iterations;
        for (d, c) in dst.iter_mut().zip(&corr) {
            *d += c;
        }
    }
    out.enforce_no_slip();
    Ok((out, iters))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidStep {
    pub velocity: VectorField,
    /// Zero-mean pressure consistent with `u_t = Lu + grad P + n grad phi`.
    pub pressure: ScalarField,
    /// `||div u||_inf` after projection.
    pub div_residual: f64,
    pub poisson: SolveStats,
}

/// Advances `u` by `dt` under density `n` and constant gravity.
pub fn advance_velocity(
    u: &VectorField,
    n: &ScalarField,
    gravity: [f64; 2],
    dt: f64,
    cfg: &FluidConfig,
) -> Result<FluidStep, FluidError> {
    let g = u.grid;
    let mut work = u.clone();
    if cfg.include_convection {
        work.axpy(-dt, &convection(u));
    }
    let (mut work, _) = implicit_viscous(&work, dt, cfg)?;
    work.axpy(dt, &buoyancy(n, gravity));
    let proj = project(&work, cfg)?;
    let div_residual = divergence(&proj.velocity).max_abs();

    // u_new = u* - grad q  =>  grad P = -grad q / dt, plus the hydrostatic
    // part that balances the mean-density buoyancy.
    let mean = n.mean();
    let mut p = ScalarField::zeros(g, Bc::Neumann);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (x, y) = g.center(i, j);
            let k = g.idx(i, j);
            p.values[k] = -proj.potential.values[k] / dt - mean * (gravity[0] * x + gravity[1] * y);
        }
    }
    let pm = p.mean();
    p.values.iter_mut().for_each(|v| *v -= pm);

    Ok(FluidStep {
        velocity: proj.velocity,
        pressure: p,
        div_residual,
        poisson: proj.stats,
    })
}

/// One fluid step for a coupled state.
pub fn step_fluid(state: &State, params: &SimParams, cfg: &FluidConfig, dt: f64) -> Result<FluidStep, FluidError> {
    advance_velocity(&state.u, &state.n, params.gravity, dt, cfg)
}

/// `(int |u|^2, int |grad u|^2)` with face quadrature; the gradient term is
/// the Dirichlet form of the no-slip vector Laplacian.
pub fn fluid_energy(u: &VectorField) -> (f64, f64) {
    let g = u.grid;
    let (nx, ny, dx, dy) = (g.nx(), g.ny(), g.dx(), g.dy());
    let area = g.cell_area();
    let kinetic: f64 = u.u1.iter().chain(&u.u2).map(|v| v * v).sum::<f64>() * area;

    let mut grad = 0.0;
    // u1: differences across cells in x, across rows in y plus half-cell wall layers.
    for j in 0..ny {
        for i in 0..nx {
            let d = (u.u1[g.xface(i + 1, j)] - u.u1[g.xface(i, j)]) / dx;
            grad += d * d;
        }
    }
    for i in 1..nx {
        for j in 0..ny - 1 {
            let d = (u.u1[g.xface(i, j + 1)] - u.u1[g.xface(i, j)]) / dy;
            grad += d * d;
        }
        let (b, t) = (u.u1[g.xface(i, 0)], u.u1[g.xface(i, ny - 1)]);
        grad += 2.0 * (b * b + t * t) / (dy * dy);
    }
    for i in 0..nx {
        for j in 0..ny {
            let d = (u.u2[g.yface(i, j + 1)] - u.u2[g.yface(i, j)]) / dy;
            grad += d * d;
        }
    }
    for j in 1..ny {
        for i in 0..nx - 1 {
            let d = (u.u2[g.yface(i + 1, j)] - u.u2[g.yface(i, j)]) / dx;
            grad += d * d;
        }
        let (l, r) = (u.u2[g.yface(0, j)], u.u2[g.yface(nx - 1, j)]);
        grad += 2.0 * (l * l + r * r) / (dx * dx);
    }
    (kinetic, grad * area)
}

/// Energy diagnostics for a coupled state.
pub fn fluid_energy_diagnostics(state: &State) -> (f64, f64) {
    fluid_energy(&state.u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::SpdOperator;
    use crate::oracles::fit_decay;
    use crate::oracles::DecayModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(g: Grid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VectorField::zeros(g);
        v.u1.iter_mut().chain(v.u2.iter_mut()).for_each(|x| *x = rng.gen_range(-1.0..1.0));
        v.enforce_no_slip();
        v
    }

    fn vortex(g: Grid, amp: f64) -> VectorField {
        let (lx, ly) = (g.lx(), g.ly());
        VectorField::from_stream_function(g, move |x, y| {
            amp * (PI * x / lx).sin().powi(2) * (PI * y / ly).sin().powi(2)
        })
    }

    #[test]
    fn projection_of_random_field_is_solenoidal() {
        let g = Grid::square(32, 1.0).unwrap();
        let v = random_field(g, 7);
        let before = divergence(&v).max_abs();
        let p = project(&v, &FluidConfig::default()).unwrap();
        let after = divergence(&p.velocity).max_abs();
        assert!(after / before <= 1e-10, "ratio {}", after / before);
        assert_eq!(p.velocity.boundary_normal_max(), 0.0);
    }

    #[test]
    fn projection_is_identity_on_solenoidal_fields() {
        let g = Grid::new(24, 32, 1.0, 1.5).unwrap();
        let v = vortex(g, 1.0);
        let p = project(&v, &FluidConfig::default()).unwrap();
        assert!(p.potential.max_abs() < 1e-12);
        let diff = p.velocity.u1.iter().zip(&v.u1).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-12);
    }

    #[test]
    fn projection_annihilates_gradients() {
        let g = Grid::square(32, 1.0).unwrap();
        let f = ScalarField::from_fn(g, Bc::Neumann, |x, y| {
            let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
            (-r2 / 0.02).exp()
        });
        let v = crate::grid::gradient(&f);
        let p = project(&v, &FluidConfig::default()).unwrap();
        let scale = v.max_abs_u1().max(v.max_abs_u2());
        assert!(p.velocity.max_abs_u1().max(p.velocity.max_abs_u2()) < 1e-9 * scale);
    }

    #[test]
    fn rejects_loose_tolerance() {
        let g = Grid::square(8, 1.0).unwrap();
        let cfg = FluidConfig { poisson_tol: 1e-3, ..FluidConfig::default() };
        assert_eq!(project(&VectorField::zeros(g), &cfg).unwrap_err(), FluidError::BadTolerance(1e-3));
    }

    #[test]
    fn rest_state_without_density_stays_at_rest() {
        let g = Grid::square(16, 1.0).unwrap();
        let n = ScalarField::zeros(g, Bc::Neumann);
        let mut u = VectorField::zeros(g);
        for _ in 0..5 {
            u = advance_velocity(&u, &n, [0.0, -1.0], 0.01, &FluidConfig::default()).unwrap().velocity;
        }
        assert!(u.u1.iter().chain(&u.u2).all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_density_buoyancy_is_pure_gradient() {
        let g = Grid::square(32, 1.0).unwrap();
        let n = ScalarField::constant(g, Bc::Neumann, 2.5);
        // raw face forcing n g is the gradient of n g . x; projecting it leaves nothing
        let mut raw = VectorField::zeros(g);
        for j in 1..g.ny() {
            for i in 0..g.nx() {
                raw.u2[g.yface(i, j)] = -2.5;
            }
        }
        let p = project(&raw, &FluidConfig::default()).unwrap();
        assert!(p.velocity.max_abs_u2() < 1e-9);
        let step = advance_velocity(&VectorField::zeros(g), &n, [0.0, -1.0], 0.05, &FluidConfig::default()).unwrap();
        assert!(step.velocity.max_abs_u1().max(step.velocity.max_abs_u2()) < 1e-12);
        // pressure carries the hydrostatic balance: grad P = -n g
        let dp = (step.pressure.at(5, 10) - step.pressure.at(5, 9)) / g.dy();
        assert!((dp - 2.5).abs() < 1e-9, "dp {dp}");
    }

    #[test]
    fn unforced_stokes_step_does_not_increase_kinetic_energy() {
        let g = Grid::square(24, 1.0).unwrap();
        let n = ScalarField::zeros(g, Bc::Neumann);
        let cfg = FluidConfig { include_convection: false, ..FluidConfig::default() };
        let mut u = project(&random_field(g, 3), &cfg).unwrap().velocity;
        let mut e = fluid_energy(&u).0;
        for _ in 0..10 {
            u = advance_velocity(&u, &n, [0.0, -1.0], 0.01, &cfg).unwrap().velocity;
            let e_new = fluid_energy(&u).0;
            assert!(e_new <= e * (1.0 + 1e-12));
            e = e_new;
        }
    }

    #[test]
    fn stokes_mode_decays_at_the_first_stokes_eigenvalue() {
        // First Stokes eigenvalue of the unit square with no-slip walls.
        const LAMBDA1: f64 = 52.344_691_168;
        let g = Grid::square(32, 1.0).unwrap();
        let n = ScalarField::zeros(g, Bc::Neumann);
        let cfg = FluidConfig { include_convection: false, ..FluidConfig::default() };
        let dt = 1e-3;
        let mut u = vortex(g, 1.0);
        let mut series = vec![(0.0, fluid_energy(&u).0)];
        let mut t = 0.0;
        for _ in 0..120 {
            u = advance_velocity(&u, &n, [0.0, 0.0], dt, &cfg).unwrap().velocity;
            t += dt;
            let e = fluid_energy(&u).0;
            assert!(e < series.last().unwrap().1);
            series.push((t, e));
        }
        let fit = fit_decay(&series, DecayModel::Exponential, (0.04, 0.12)).unwrap();
        // backward Euler damps each mode by 1/(1 + dt lambda) per step
        let expected = 2.0 * (1.0 + dt * LAMBDA1).ln() / dt;
        assert!((fit.rate - expected).abs() / expected < 0.10, "rate {} vs {}", fit.rate, expected);
    }

    #[test]
    fn energy_of_zero_field() {
        let g = Grid::square(8, 1.0).unwrap();
        assert_eq!(fluid_energy(&VectorField::zeros(g)), (0.0, 0.0));
    }

    #[test]
    fn kinetic_energy_of_sine_stream_function() {
        // psi = A sin(pi x / lx) sin(pi y / ly); int |u|^2 = A^2 pi^2 (1/lx^2 + 1/ly^2) lx ly / 4
        let (lx, ly, amp) = (2.0, 1.0, 0.3);
        let exact = amp * amp * PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly)) * lx * ly / 4.0;
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = Grid::new(2 * n, n, lx, ly).unwrap();
            let u = VectorField::from_stream_function(g, |x, y| amp * (PI * x / lx).sin() * (PI * y / ly).sin());
            errs.push((fluid_energy(&u).0 - exact).abs() / exact);
        }
        assert!(errs[1] < 2e-3, "{errs:?}");
        assert!(errs[1] < errs[0]);
    }

    #[test]
    fn dirichlet_form_matches_operator() {
        let g = Grid::new(10, 13, 1.0, 1.2).unwrap();
        let u = project(&random_field(g, 11), &FluidConfig::default()).unwrap().velocity;
        let (_, grad) = fluid_energy(&u);
        let mut form = 0.0;
        for (component, data) in [(Component::X, &u.u1), (Component::Y, &u.u2)] {
            let op = VelocityHelmholtz { grid: g, component, dt: 1.0 };
            let mut lu = vec![0.0; op.len()];
            op.laplacian(data, &mut lu);
            form -= data.iter().zip(&lu).map(|(a, b)| a * b).sum::<f64>();
        }
        form *= g.cell_area();
        assert!((grad - form).abs() <= 1e-10 * form.abs());
    }
}
