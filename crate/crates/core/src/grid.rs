//! Cell-centered rectangular grid, MAC-staggered fields and the discrete
//! differential operators used by every solver in the crate.
//!
//! Scalars live at cell centers, indexed `j * nx + i`. The x-velocity lives on
//! the `(nx + 1) * ny` vertical faces and the y-velocity on the `nx * (ny + 1)`
//! horizontal faces. Boundary-normal faces always carry zero velocity.
//!
//! Boundary closure uses a single ghost layer: mirror for homogeneous Neumann,
//! negation for homogeneous Dirichlet. With that closure the 5-point Laplacian
//! is exactly `divergence(gradient(f))` for Neumann fields, so the cell sum of
//! any flux-form operator telescopes to zero.

use thiserror::Error;

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {MIN_CELLS} cells per axis, got {nx}x{ny}")]
    TooCoarse { nx: usize, ny: usize },
    #[error("domain lengths must be positive and finite, got {lx} x {ly}")]
    BadExtent { lx: f64, ly: f64 },
    #[error("operands live on different grids")]
    Mismatch,
    #[error("density must be nonnegative, found {value} at cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, GridError> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(GridError::TooCoarse { nx, ny });
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(GridError::BadExtent { lx, ly });
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        })
    }

    /// Square grid on `[0, l]^2`.
    pub fn square(n: usize, l: f64) -> Result<Self, GridError> {
        Self::new(n, n, l, l)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn y_faces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell-center coordinates.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    fn check_same(&self, other: &Grid) -> Result<(), GridError> {
        if self == other {
            Ok(())
        } else {
            Err(GridError::Mismatch)
        }
    }
}

/// Homogeneous boundary condition carried by a scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub bc: Bc,
}

impl ScalarField {
    pub fn zeros(grid: Grid, bc: Bc) -> Self {
        Self::constant(grid, bc, 0.0)
    }

    pub fn constant(grid: Grid, bc: Bc, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.cells()],
            bc,
        }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, bc: Bc, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values, bc }
    }

    pub fn with_values(grid: Grid, bc: Bc, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.cells(), "scalar field length");
        Self { grid, values, bc }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Face-centered vector field with no-slip walls.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    /// x-component on vertical faces, `(nx + 1) * ny` entries.
    pub u1: Vec<f64>,
    /// y-component on horizontal faces, `nx * (ny + 1)` entries.
    pub u2: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            u1: vec![0.0; grid.x_faces()],
            u2: vec![0.0; grid.y_faces()],
        }
    }

    /// Samples `(f1, f2)` at face midpoints; boundary-normal faces are zeroed.
    pub fn from_fn(
        grid: Grid,
        f1: impl Fn(f64, f64) -> f64,
        f2: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut v = Self::zeros(grid);
        let (nx, ny, dx, dy) = (grid.nx(), grid.ny(), grid.dx(), grid.dy());
        for j in 0..ny {
            for i in 1..nx {
                v.u1[grid.xface(i, j)] = f1(i as f64 * dx, (j as f64 + 0.5) * dy);
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                v.u2[grid.yface(i, j)] = f2((i as f64 + 0.5) * dx, j as f64 * dy);
            }
        }
        v
    }

    /// Discretely solenoidal field `(dpsi/dy, -dpsi/dx)` from a stream
    /// function sampled at grid nodes. `psi` should vanish on the boundary.
    pub fn from_stream_function(grid: Grid, psi: impl Fn(f64, f64) -> f64) -> Self {
        let (nx, ny, dx, dy) = (grid.nx(), grid.ny(), grid.dx(), grid.dy());
        let node = |i: usize, j: usize| psi(i as f64 * dx, j as f64 * dy);
        let mut v = Self::zeros(grid);
        for j in 0..ny {
            for i in 1..nx {
                v.u1[grid.xface(i, j)] = (node(i, j + 1) - node(i, j)) / dy;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                v.u2[grid.yface(i, j)] = -(node(i + 1, j) - node(i, j)) / dx;
            }
        }
        v
    }

    /// Zeroes the boundary-normal faces.
    pub fn enforce_no_slip(&mut self) {
        let g = self.grid;
        for j in 0..g.ny() {
            self.u1[g.xface(0, j)] = 0.0;
            self.u1[g.xface(g.nx(), j)] = 0.0;
        }
        for i in 0..g.nx() {
            self.u2[g.yface(i, 0)] = 0.0;
            self.u2[g.yface(i, g.ny())] = 0.0;
        }
    }

    pub fn max_abs_u1(&self) -> f64 {
        self.u1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_u2(&self) -> f64 {
        self.u2.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.u1.iter().chain(&self.u2).all(|v| v.is_finite())
    }

    /// Largest magnitude on a boundary-normal face; zero for a valid field.
    pub fn boundary_normal_max(&self) -> f64 {
        let g = self.grid;
        let mut m: f64 = 0.0;
        for j in 0..g.ny() {
            m = m.max(self.u1[g.xface(0, j)].abs());
            m = m.max(self.u1[g.xface(g.nx(), j)].abs());
        }
        for i in 0..g.nx() {
            m = m.max(self.u2[g.yface(i, 0)].abs());
            m = m.max(self.u2[g.yface(i, g.ny())].abs());
        }
        m
    }

    /// Velocity interpolated to cell centers.
    pub fn center_values(&self, i: usize, j: usize) -> (f64, f64) {
        let g = self.grid;
        (
            0.5 * (self.u1[g.xface(i, j)] + self.u1[g.xface(i + 1, j)]),
            0.5 * (self.u2[g.yface(i, j)] + self.u2[g.yface(i, j + 1)]),
        )
    }

    pub fn scale(&mut self, s: f64) {
        self.u1.iter_mut().chain(self.u2.iter_mut()).for_each(|v| *v *= s);
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &VectorField) {
        for (a, b) in self.u1.iter_mut().zip(&other.u1) {
            *a += s * b;
        }
        for (a, b) in self.u2.iter_mut().zip(&other.u2) {
            *a += s * b;
        }
    }
}

/// Hooks that deliberately corrupt operators so the acceptance suite can prove
/// it notices. Thread-local, so only the calling thread is affected.
#[doc(hidden)]
pub mod test_hooks {
    use std::cell::Cell;

    thread_local! {
        static FLIP_LAPLACIAN_CENTER: Cell<bool> = const { Cell::new(false) };
    }

    /// Runs `f` with the sign of the Laplacian's center coefficient flipped.
    pub fn with_flipped_laplacian<T>(f: impl FnOnce() -> T) -> T {
        struct Reset(bool);
        impl Drop for Reset {
            fn drop(&mut self) {
                FLIP_LAPLACIAN_CENTER.with(|c| c.set(self.0));
            }
        }
        let prev = FLIP_LAPLACIAN_CENTER.with(|c| c.replace(true));
        let _reset = Reset(prev);
        f()
    }

    pub(crate) fn laplacian_flipped() -> bool {
        FLIP_LAPLACIAN_CENTER.with(|c| c.get())
    }
}

/// 5-point Laplacian with ghost cells matching `f.bc`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid, f.bc);
    laplacian_into(&f.values, f.grid, f.bc, &mut out.values);
    out
}

pub(crate) fn laplacian_into(f: &[f64], g: Grid, bc: Bc, out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let (ax, ay) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    // Ghost contribution to (ghost - center): 0 for mirror, -2 * center for negation.
    let wall = match bc {
        Bc::Neumann => 0.0,
        Bc::Dirichlet => -2.0,
    };
    let cs = if test_hooks::laplacian_flipped() { -1.0 } else { 1.0 };
    // x part, row by row, then the y part added from neighbouring rows
    for j in 0..ny {
        let r = j * nx;
        let cur = &f[r..r + nx];
        let o = &mut out[r..r + nx];
        o[0] = ax * ((wall - 1.0) * cs * cur[0] + cur[1]);
        o[nx - 1] = ax * (cur[nx - 2] + (wall - 1.0) * cs * cur[nx - 1]);
        for i in 1..nx - 1 {
            o[i] = ax * (cur[i - 1] - 2.0 * cs * cur[i] + cur[i + 1]);
        }
    }
    for j in 0..ny {
        let r = j * nx;
        let cur = &f[r..r + nx];
        let o = &mut out[r..r + nx];
        match (j > 0, j + 1 < ny) {
            (true, true) => {
                let (dn, up) = (&f[r - nx..r], &f[r + nx..r + 2 * nx]);
                for i in 0..nx {
                    o[i] += ay * (dn[i] - 2.0 * cs * cur[i] + up[i]);
                }
            }
            (false, true) => {
                let up = &f[r + nx..r + 2 * nx];
                for i in 0..nx {
                    o[i] += ay * ((wall - 1.0) * cs * cur[i] + up[i]);
                }
            }
            (true, false) => {
                let dn = &f[r - nx..r];
                for i in 0..nx {
                    o[i] += ay * (dn[i] + (wall - 1.0) * cs * cur[i]);
                }
            }
            (false, false) => unreachable!("grids have at least {MIN_CELLS} rows"),
        }
    }
}

/// Face-centered gradient. Boundary-normal faces are zero (no flux through
/// walls), which is exact for Neumann fields.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let mut v = VectorField::zeros(g);
    gradient_into(&f.values, g, &mut v.u1, &mut v.u2);
    v
}

pub(crate) fn gradient_into(f: &[f64], g: Grid, gx: &mut [f64], gy: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let (idx, idy) = (1.0 / g.dx(), 1.0 / g.dy());
    for j in 0..ny {
        gx[g.xface(0, j)] = 0.0;
        for i in 1..nx {
            gx[g.xface(i, j)] = (f[g.idx(i, j)] - f[g.idx(i - 1, j)]) * idx;
        }
        gx[g.xface(nx, j)] = 0.0;
    }
    for i in 0..nx {
        gy[g.yface(i, 0)] = 0.0;
        gy[g.yface(i, ny)] = 0.0;
    }
    for j in 1..ny {
        for i in 0..nx {
            gy[g.yface(i, j)] = (f[g.idx(i, j)] - f[g.idx(i, j - 1)]) * idy;
        }
    }
}

/// Cell-centered divergence; the negative adjoint of [`gradient`].
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let mut out = ScalarField::zeros(g, Bc::Neumann);
    divergence_into(&v.u1, &v.u2, g, &mut out.values);
    out
}

pub(crate) fn divergence_into(u1: &[f64], u2: &[f64], g: Grid, out: &mut [f64]) {
    let (idx, idy) = (1.0 / g.dx(), 1.0 / g.dy());
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            out[g.idx(i, j)] = (u1[g.xface(i + 1, j)] - u1[g.xface(i, j)]) * idx
                + (u2[g.yface(i, j + 1)] - u2[g.yface(i, j)]) * idy;
        }
    }
}

/// First-order upwind approximation of `v . grad f`, written in flux form
/// `div(v f)` so that it conserves the integral of `f` exactly. The two agree
/// whenever `v` is discretely divergence-free.
pub fn advect(f: &ScalarField, v: &VectorField) -> Result<ScalarField, GridError> {
    f.grid.check_same(&v.grid)?;
    let g = f.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let mut fx = vec![0.0; g.x_faces()];
    let mut fy = vec![0.0; g.y_faces()];
    let s = &f.values;
    for j in 0..ny {
        for i in 1..nx {
            let vel = v.u1[g.xface(i, j)];
            let up = if vel > 0.0 { s[g.idx(i - 1, j)] } else { s[g.idx(i, j)] };
            fx[g.xface(i, j)] = vel * up;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let vel = v.u2[g.yface(i, j)];
            let up = if vel > 0.0 { s[g.idx(i, j - 1)] } else { s[g.idx(i, j)] };
            fy[g.yface(i, j)] = vel * up;
        }
    }
    let mut out = ScalarField::zeros(g, f.bc);
    divergence_into(&fx, &fy, g, &mut out.values);
    Ok(out)
}

/// `chi * div(n grad w)` with face values of `n` taken upstream of the
/// chemotactic drift `-chi grad w`.
pub fn chemotaxis_flux_div(
    n: &ScalarField,
    w: &ScalarField,
    chi: f64,
) -> Result<ScalarField, GridError> {
    n.grid.check_same(&w.grid)?;
    if let Some((cell, &value)) = n.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(GridError::NegativeDensity { cell, value });
    }
    let g = n.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let mut gx = vec![0.0; g.x_faces()];
    let mut gy = vec![0.0; g.y_faces()];
    gradient_into(&w.values, g, &mut gx, &mut gy);
    let s = &n.values;
    for j in 0..ny {
        for i in 1..nx {
            let k = g.xface(i, j);
            let up = if gx[k] > 0.0 { s[g.idx(i, j)] } else { s[g.idx(i - 1, j)] };
            gx[k] *= chi * up;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let k = g.yface(i, j);
            let up = if gy[k] > 0.0 { s[g.idx(i, j)] } else { s[g.idx(i, j - 1)] };
            gy[k] *= chi * up;
        }
    }
    let mut out = ScalarField::zeros(g, Bc::Neumann);
    divergence_into(&gx, &gy, g, &mut out.values);
    Ok(out)
}

/// Cell-centered `|grad f|^2` as the average of the squared face gradients on
/// each axis. Summed over cells this reproduces the face quadrature of
/// `|grad f|^2` exactly.
pub fn grad_sq_cells(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let v = gradient(f);
    let mut out = ScalarField::zeros(g, Bc::Neumann);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (a, b) = (v.u1[g.xface(i, j)], v.u1[g.xface(i + 1, j)]);
            let (c, d) = (v.u2[g.yface(i, j)], v.u2[g.yface(i, j + 1)]);
            out.values[g.idx(i, j)] = 0.5 * (a * a + b * b) + 0.5 * (c * c + d * d);
        }
    }
    out
}
