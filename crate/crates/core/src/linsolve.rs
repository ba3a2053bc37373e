//! Jacobi-preconditioned conjugate gradients on matrix-free grid operators.
//!
//! Convergence is declared when `||b - A x||_inf <= tol * ||b||_inf`. For the
//! singular Neumann Poisson operator the right-hand side is projected onto the
//! zero-mean subspace first and the returned iterate is mean-free.

use crate::grid::{laplacian_into, Bc, Grid};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{system} solve did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        system: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("{system} solve produced a non-finite iterate")]
    NonFinite { system: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `||r||_inf / ||b||_inf` (0 for a zero right-hand side).
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

/// Symmetric positive (semi-)definite operator acting on flat grid arrays.
pub trait SpdOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
    /// True when constants span the null space (pure Neumann problems).
    fn singular(&self) -> bool {
        false
    }
    fn name(&self) -> &'static str;
}

/// `-L` for the Neumann 5-point Laplacian on cell centers.
pub struct NeumannPoisson {
    pub grid: Grid,
}

/// `I - dt * L` for a cell-centered scalar with the given boundary closure.
pub struct ScalarHelmholtz {
    pub grid: Grid,
    pub bc: Bc,
    pub dt: f64,
}

/// Which velocity component a [`VelocityHelmholtz`] acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    X,
    Y,
}

/// `I - dt * L` for one MAC velocity component under no-slip walls. Wall
/// faces are held fixed (identity rows); tangential walls use ghost negation.
pub struct VelocityHelmholtz {
    pub grid: Grid,
    pub component: Component,
    pub dt: f64,
}

impl SpdOperator for NeumannPoisson {
    fn len(&self) -> usize {
        self.grid.cells()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        laplacian_into(x, self.grid, Bc::Neumann, y);
        y.iter_mut().for_each(|v| *v = -*v);
    }
    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let (ax, ay) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
        let mut d = vec![0.0; g.cells()];
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let nx_links = (i > 0) as u8 + (i + 1 < g.nx()) as u8;
                let ny_links = (j > 0) as u8 + (j + 1 < g.ny()) as u8;
                d[g.idx(i, j)] = ax * nx_links as f64 + ay * ny_links as f64;
            }
        }
        d
    }
    fn singular(&self) -> bool {
        true
    }
    fn name(&self) -> &'static str {
        "pressure Poisson"
    }
}

impl SpdOperator for ScalarHelmholtz {
    fn len(&self) -> usize {
        self.grid.cells()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        laplacian_into(x, self.grid, self.bc, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - self.dt * *yi;
        }
    }
    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let (ax, ay) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
        let wall = match self.bc {
            Bc::Neumann => 0.0,
            Bc::Dirichlet => 2.0,
        };
        let mut d = vec![0.0; g.cells()];
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let coef = |inside: bool, a: f64| if inside { a } else { wall * a };
                d[g.idx(i, j)] = 1.0
                    + self.dt
                        * (coef(i > 0, ax)
                            + coef(i + 1 < g.nx(), ax)
                            + coef(j > 0, ay)
                            + coef(j + 1 < g.ny(), ay));
            }
        }
        d
    }
    fn name(&self) -> &'static str {
        "scalar diffusion"
    }
}

impl VelocityHelmholtz {
    /// Applies the no-slip vector Laplacian to one component; wall faces map to 0.
    pub fn laplacian(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let (ax, ay) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
        let (nx, ny) = (g.nx(), g.ny());
        match self.component {
            Component::X => {
                // rows of nx + 1 faces; faces 0 and nx are walls
                let w = nx + 1;
                for j in 0..ny {
                    let r = j * w;
                    let cur = &x[r..r + w];
                    let o = &mut y[r..r + w];
                    // wall faces hold the Dirichlet value 0 and are not read
                    o[1] = ax * (-2.0 * cur[1] + cur[2]);
                    o[nx - 1] = ax * (cur[nx - 2] - 2.0 * cur[nx - 1]);
                    for i in 2..nx - 1 {
                        o[i] = ax * (cur[i - 1] - 2.0 * cur[i] + cur[i + 1]);
                    }
                    o[0] = 0.0;
                    o[nx] = 0.0;
                }
                for j in 0..ny {
                    let r = j * w;
                    // tangential walls: ghost = -value
                    let (dn, up): (Option<&[f64]>, Option<&[f64]>) = (
                        (j > 0).then(|| &x[r - w..r]),
                        (j + 1 < ny).then(|| &x[r + w..r + 2 * w]),
                    );
                    let cur = &x[r..r + w];
                    let o = &mut y[r..r + w];
                    add_vertical(&mut o[1..nx], &cur[1..nx], dn.map(|d| &d[1..nx]), up.map(|u| &u[1..nx]), ay);
                }
            }
            Component::Y => {
                // rows j = 0 and j = ny are walls
                y[..nx].iter_mut().for_each(|v| *v = 0.0);
                y[ny * nx..].iter_mut().for_each(|v| *v = 0.0);
                for j in 1..ny {
                    let r = j * nx;
                    let cur = &x[r..r + nx];
                    let o = &mut y[r..r + nx];
                    o[0] = ax * (-3.0 * cur[0] + cur[1]);
                    o[nx - 1] = ax * (cur[nx - 2] - 3.0 * cur[nx - 1]);
                    for i in 1..nx - 1 {
                        o[i] = ax * (cur[i - 1] - 2.0 * cur[i] + cur[i + 1]);
                    }
                    // wall rows are zero, which is the Dirichlet value
                    let dn = &x[r - nx..r];
                    let up = &x[r + nx..r + 2 * nx];
                    let (dn, up) = (
                        if j > 1 { Some(dn) } else { None },
                        if j + 1 < ny { Some(up) } else { None },
                    );
                    add_vertical_dirichlet_node(o, cur, dn, up, ay);
                }
            }
        }
    }

    fn is_wall(&self, k: usize) -> bool {
        let g = self.grid;
        match self.component {
            Component::X => {
                let i = k % (g.nx() + 1);
                i == 0 || i == g.nx()
            }
            Component::Y => {
                let j = k / g.nx();
                j == 0 || j == g.ny()
            }
        }
    }
}

impl SpdOperator for VelocityHelmholtz {
    fn len(&self) -> usize {
        match self.component {
            Component::X => self.grid.x_faces(),
            Component::Y => self.grid.y_faces(),
        }
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        // the Laplacian is zero on wall faces, which leaves identity rows there
        self.laplacian(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - self.dt * *yi;
        }
    }
    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let (ax, ay) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
        (0..self.len())
            .map(|k| {
                if self.is_wall(k) {
                    return 1.0;
                }
                // Tangential wall neighbours add one extra unit through the ghost.
                let extra = match self.component {
                    Component::X => {
                        let j = k / (g.nx() + 1);
                        ay * ((j == 0) as u8 + (j + 1 == g.ny()) as u8) as f64
                    }
                    Component::Y => {
                        let i = k % g.nx();
                        ax * ((i == 0) as u8 + (i + 1 == g.nx()) as u8) as f64
                    }
                };
                1.0 + self.dt * (2.0 * ax + 2.0 * ay + extra)
            })
            .collect()
    }
    fn name(&self) -> &'static str {
        "viscous diffusion"
    }
}

/// `o += ay (dn - 2 c + up)` with ghost negation where a neighbour row is missing.
fn add_vertical(o: &mut [f64], cur: &[f64], dn: Option<&[f64]>, up: Option<&[f64]>, ay: f64) {
    match (dn, up) {
        (Some(d), Some(u)) => {
            for i in 0..o.len() {
                o[i] += ay * (d[i] - 2.0 * cur[i] + u[i]);
            }
        }
        (None, Some(u)) => {
            for i in 0..o.len() {
                o[i] += ay * (u[i] - 3.0 * cur[i]);
            }
        }
        (Some(d), None) => {
            for i in 0..o.len() {
                o[i] += ay * (d[i] - 3.0 * cur[i]);
            }
        }
        (None, None) => unreachable!(),
    }
}

/// `o += ay (dn - 2 c + up)` where a missing neighbour is a wall node with value 0.
fn add_vertical_dirichlet_node(o: &mut [f64], cur: &[f64], dn: Option<&[f64]>, up: Option<&[f64]>, ay: f64) {
    for i in 0..o.len() {
        let d = dn.map_or(0.0, |d| d[i]);
        let u = up.map_or(0.0, |u| u[i]);
        o[i] += ay * (d - 2.0 * cur[i] + u);
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Solves `A x = b` starting from the supplied `x`.
pub fn pcg<A: SpdOperator>(
    op: &A,
    b: &[f64],
    x: &mut [f64],
    settings: SolverSettings,
) -> Result<SolveStats, SolveError> {
    let n = op.len();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let mut rhs = b.to_vec();
    if op.singular() {
        remove_mean(&mut rhs);
    }
    let b_norm = norm_inf(&rhs);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0 });
    }
    let target = settings.tol * b_norm;
    let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    // A recursive residual can undershoot the true one; restart from the
    // current iterate until the true residual meets the target.
    for _restart in 0..MAX_RESTARTS {
        let res = cg_cycle(op, &rhs, x, &inv_diag, target, settings.max_iter, &mut iterations, &mut r);
        if op.singular() {
            remove_mean(x);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite { system: op.name() });
        }
        let true_res = true_residual(op, &rhs, x, &mut r);
        if true_res <= target {
            return Ok(SolveStats { iterations, residual: true_res / b_norm });
        }
        if iterations >= settings.max_iter || res.is_none() {
            return Err(SolveError::NotConverged {
                system: op.name(),
                iterations,
                residual: true_res / b_norm,
            });
        }
    }
    let true_res = true_residual(op, &rhs, x, &mut r);
    Err(SolveError::NotConverged {
        system: op.name(),
        iterations,
        residual: true_res / b_norm,
    })
}

const MAX_RESTARTS: usize = 8;

fn true_residual<A: SpdOperator>(op: &A, rhs: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    op.apply(x, r);
    r.iter().zip(rhs).fold(0.0_f64, |m, (a, b)| m.max((b - a).abs()))
}

/// One preconditioned CG run from `x`. Returns the final recursive residual,
/// or `None` if the iteration cap was hit or the search direction degenerated.
#[allow(clippy::too_many_arguments)]
fn cg_cycle<A: SpdOperator>(
    op: &A,
    rhs: &[f64],
    x: &mut [f64],
    inv_diag: &[f64],
    target: f64,
    max_iter: usize,
    iterations: &mut usize,
    r: &mut [f64],
) -> Option<f64> {
    let n = rhs.len();
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    if op.singular() {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(r, &z);
    let mut res = norm_inf(r);
    let mut since_refresh = 0;
    let singular = op.singular();
    while res > target {
        if *iterations >= max_iter {
            return None;
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return None;
        }
        let alpha = rz / pap;
        *iterations += 1;
        since_refresh += 1;
        res = 0.0;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            res = res.max(r[i].abs());
        }
        // periodic refresh against drift in long solves
        if since_refresh == 50 {
            since_refresh = 0;
            op.apply(x, r);
            res = 0.0;
            for (ri, bi) in r.iter_mut().zip(rhs) {
                *ri = bi - *ri;
                res = res.max(ri.abs());
            }
        }
        if res <= target {
            break;
        }
        // z = D^-1 r, projected to zero mean for singular systems:
        // r . (z - m) = r . z - m sum(r)
        let (mut rz_new, mut z_sum, mut r_sum) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let zi = r[i] * inv_diag[i];
            z[i] = zi;
            rz_new += r[i] * zi;
            z_sum += zi;
            r_sum += r[i];
        }
        let m = if singular { z_sum / n as f64 } else { 0.0 };
        rz_new -= m * r_sum;
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = (z[i] - m) + beta * p[i];
        }
    }
    Some(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SolverSettings {
        SolverSettings { tol: 1e-12, max_iter: 10_000 }
    }

    fn check_symmetric<A: SpdOperator>(op: &A) {
        let n = op.len();
        let mut e_i = vec![0.0; n];
        let mut col_i = vec![0.0; n];
        let mut e_j = vec![0.0; n];
        let mut col_j = vec![0.0; n];
        for (i, j) in [(3, 17), (0, 1), (n - 1, n / 2), (n / 3, n / 3 + 9)] {
            e_i.iter_mut().for_each(|v| *v = 0.0);
            e_j.iter_mut().for_each(|v| *v = 0.0);
            e_i[i] = 1.0;
            e_j[j] = 1.0;
            op.apply(&e_i, &mut col_i);
            op.apply(&e_j, &mut col_j);
            assert!((col_i[j] - col_j[i]).abs() < 1e-9, "{} asymmetric", op.name());
            assert!((col_i[i] - op.diagonal()[i]).abs() < 1e-9, "{} diagonal", op.name());
        }
    }

    #[test]
    fn operators_are_symmetric_with_matching_diagonals() {
        let g = Grid::new(9, 11, 1.0, 2.0).unwrap();
        check_symmetric(&NeumannPoisson { grid: g });
        check_symmetric(&ScalarHelmholtz { grid: g, bc: Bc::Neumann, dt: 0.1 });
        check_symmetric(&ScalarHelmholtz { grid: g, bc: Bc::Dirichlet, dt: 0.1 });
        check_symmetric(&VelocityHelmholtz { grid: g, component: Component::X, dt: 0.1 });
        check_symmetric(&VelocityHelmholtz { grid: g, component: Component::Y, dt: 0.1 });
    }

    #[test]
    fn neumann_poisson_recovers_mean_free_solution() {
        let g = Grid::square(24, 1.0).unwrap();
        let op = NeumannPoisson { grid: g };
        let mut exact: Vec<f64> = (0..g.cells()).map(|k| ((k * 37 % 101) as f64).sin()).collect();
        remove_mean(&mut exact);
        let mut b = vec![0.0; g.cells()];
        op.apply(&exact, &mut b);
        let mut x = vec![0.0; g.cells()];
        let stats = pcg(&op, &b, &mut x, settings()).unwrap();
        assert!(stats.residual <= 1e-12);
        let err = x.iter().zip(&exact).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let g = Grid::square(8, 1.0).unwrap();
        let mut x = vec![1.0; g.cells()];
        let stats = pcg(&NeumannPoisson { grid: g }, &vec![0.0; g.cells()], &mut x, settings()).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let g = Grid::square(32, 1.0).unwrap();
        let b: Vec<f64> = (0..g.cells()).map(|k| (k as f64).cos()).collect();
        let mut x = vec![0.0; g.cells()];
        let err = pcg(
            &NeumannPoisson { grid: g },
            &b,
            &mut x,
            SolverSettings { tol: 1e-12, max_iter: 3 },
        )
        .unwrap_err();
        match err {
            SolveError::NotConverged { iterations, residual, .. } => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn velocity_helmholtz_keeps_walls() {
        let g = Grid::square(12, 1.0).unwrap();
        let op = VelocityHelmholtz { grid: g, component: Component::X, dt: 0.05 };
        let mut b = vec![1.0; g.x_faces()];
        for j in 0..g.ny() {
            b[g.xface(0, j)] = 0.0;
            b[g.xface(g.nx(), j)] = 0.0;
        }
        let mut x = vec![0.0; g.x_faces()];
        pcg(&op, &b, &mut x, settings()).unwrap();
        for j in 0..g.ny() {
            assert_eq!(x[g.xface(0, j)], 0.0);
            assert_eq!(x[g.xface(g.nx(), j)], 0.0);
        }
        // implicit diffusion toward zero walls shrinks the plateau
        assert!(x.iter().all(|v| *v <= 1.0 && *v >= 0.0));
    }
}
