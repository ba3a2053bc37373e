//! Energy functionals, norms and spectral constants evaluated on a [`State`].
//!
//! All integrals use the same midpoint (cell) and face quadratures as the
//! solvers, so `||grad w||_2^2` here matches the `-|grad w|^2` sink of the
//! signal update term for term.

use crate::chemo::{recover_c, SimParams, State};
use crate::fluid::fluid_energy;
use crate::grid::{grad_sq_cells, Grid};
use std::f64::consts::PI;
use thiserror::Error;

/// Default shift in the `r <= 0` entropy functional.
pub const DEFAULT_ENERGY_SHIFT: f64 = 10.0;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FunctionalError {
    #[error("H(s) needs r > 0 (got r = {0}); use the shifted entropy for r <= 0")]
    Regime(f64),
    #[error("H(s) needs s >= 0 and mu > 0")]
    Domain,
}

/// `(1 + x) ln(1 + x) - x`, accurate near `x = 0` where it behaves like `x^2 / 2`.
fn entropy_kernel(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // sum_{k>=2} (-1)^k x^k / (k (k - 1))
        let mut term = x * x;
        let mut acc = 0.0;
        for k in 2..9 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / (k * (k - 1)) as f64;
            term *= x;
        }
        acc
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// `H(s) = s ln(mu s / (e r)) + r / mu`, with `H(0) = r / mu`.
pub fn h(s: f64, r: f64, mu: f64) -> Result<f64, FunctionalError> {
    if r <= 0.0 {
        return Err(FunctionalError::Regime(r));
    }
    if !(s >= 0.0 && mu > 0.0) {
        return Err(FunctionalError::Domain);
    }
    let eq = r / mu;
    if s == 0.0 {
        return Ok(eq);
    }
    // H(s) = (r/mu) phi(mu s / r - 1)
    Ok(eq * entropy_kernel(s / eq - 1.0))
}

/// `s ln s` continued by 0 at the origin.
pub fn s_ln_s(s: f64) -> f64 {
    if s > 0.0 {
        s * s.ln()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    PositiveR,
    NonPositiveR,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub regime: Regime,
    pub f_value: f64,
    /// `int H(n)` for `r > 0`, `int n (ln n + a)` otherwise.
    pub h_integral: f64,
    pub grad_w_sq: f64,
    /// Shift used for `r <= 0`; `None` in the positive regime.
    pub a: Option<f64>,
    pub t: f64,
}

/// Regime-appropriate energy `int H(n) + chi/2 int |grad w|^2` (`r > 0`) or
/// `int n (ln n + a) + chi/2 int |grad w|^2` (`r <= 0`).
pub fn energy(state: &State, params: &SimParams, a: f64) -> EnergyReport {
    let area = state.grid().cell_area();
    let grad_w_sq = grad_sq_cells(&state.w).values.iter().sum::<f64>() * area;
    let (regime, h_integral, shift) = if params.r > 0.0 {
        let sum: f64 = state
            .n
            .values
            .iter()
            .map(|&s| h(s.max(0.0), params.r, params.mu).expect("positive regime"))
            .sum();
        (Regime::PositiveR, sum * area, None)
    } else {
        let sum: f64 = state.n.values.iter().map(|&s| s_ln_s(s) + a * s).sum();
        (Regime::NonPositiveR, sum * area, Some(a))
    };
    EnergyReport {
        regime,
        f_value: h_integral + 0.5 * params.chi * grad_w_sq,
        h_integral,
        grad_w_sq,
        a: shift,
        t: state.t,
    }
}

/// Norm diagnostics of a state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    pub mass: f64,
    pub l2_n: f64,
    pub linf_n: f64,
    pub dev_inf: f64,
    pub grad_w_l2: f64,
    pub grad_w_l6: f64,
    pub grad_w_linf: f64,
    pub u_l2: f64,
    pub u_linf: f64,
    pub c_min: f64,
    pub c_max: f64,
}

/// Since `grad c / c = -grad w`, the gradient norms of `w` are the norms of
/// the chemotactic sensitivity.
pub fn norms(state: &State, params: &SimParams) -> Norms {
    let g = state.grid();
    let area = g.cell_area();
    let n = &state.n;
    let eq = params.equilibrium();
    let gsq = grad_sq_cells(&state.w);
    let c = recover_c(state);
    let mut u_linf: f64 = 0.0;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (a, b) = state.u.center_values(i, j);
            u_linf = u_linf.max(a.hypot(b));
        }
    }
    Norms {
        mass: n.integral(),
        l2_n: (n.values.iter().map(|v| v * v).sum::<f64>() * area).sqrt(),
        linf_n: n.max_abs(),
        dev_inf: n.values.iter().fold(0.0, |m, v| m.max((v - eq).abs())),
        grad_w_l2: (gsq.values.iter().sum::<f64>() * area).sqrt(),
        grad_w_l6: (gsq.values.iter().map(|s| s * s * s).sum::<f64>() * area).powf(1.0 / 6.0),
        grad_w_linf: gsq.max().max(0.0).sqrt(),
        u_l2: fluid_energy(&state.u).0.sqrt(),
        u_linf,
        c_min: c.min(),
        c_max: c.max(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `|Omega| / (mu int n0)`.
    pub gamma: f64,
    /// First nonzero Neumann eigenvalue of `-lap` on the rectangle.
    pub lambda1: f64,
    /// First Dirichlet eigenvalue, the Poincare constant for no-slip fields.
    pub cp_dirichlet: f64,
    pub mass0: f64,
    pub area: f64,
}

impl DerivedConstants {
    pub fn new(grid: &Grid, mu: f64, mass0: f64) -> Self {
        let (lx, ly) = (grid.lx(), grid.ly());
        Self {
            gamma: grid.area() / (mu * mass0),
            lambda1: (PI / lx).powi(2).min((PI / ly).powi(2)),
            cp_dirichlet: PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly)),
            mass0,
            area: grid.area(),
        }
    }

    pub fn from_state(state: &State, params: &SimParams) -> Self {
        Self::new(&params.grid, params.mu, state.n.integral())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemo::{init_state, InitSpec};
    use crate::grid::{Bc, ScalarField};
    use proptest::prelude::*;

    fn equilibrium_state() -> (State, SimParams) {
        let mut p = SimParams::new(Grid::square(16, 1.0).unwrap());
        p.r = 1.0;
        p.mu = 4.0;
        p.init = InitSpec::uniform(0.25);
        let mut s = init_state(&p).unwrap();
        s.w.values.iter_mut().for_each(|v| *v = 0.7);
        (s, p)
    }

    #[test]
    fn h_special_values() {
        assert_eq!(h(0.5, 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(h(0.0, 1.0, 2.0).unwrap(), 0.5);
        assert!(h(0.5, 1.0, 1.0).unwrap() + h(1.5, 1.0, 1.0).unwrap() >= 2.0 * h(1.0, 1.0, 1.0).unwrap());
        assert_eq!(h(1.0, 0.0, 1.0), Err(FunctionalError::Regime(0.0)));
        assert_eq!(h(-1.0, 1.0, 1.0), Err(FunctionalError::Domain));
    }

    #[test]
    fn h_matches_definition() {
        for &(s, r, mu) in &[(0.3_f64, 1.0_f64, 2.0_f64), (5.0, 2.0, 0.5), (0.01, 3.0, 7.0)] {
            let direct = s * (mu * s / (std::f64::consts::E * r)).ln() + r / mu;
            assert!((h(s, r, mu).unwrap() - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn h_is_convex_on_a_grid() {
        let (r, mu) = (1.0, 1.0);
        let step = 1e-3;
        for k in 10..5000 {
            let s = k as f64 * step;
            let second = (h(s + step, r, mu).unwrap() - 2.0 * h(s, r, mu).unwrap() + h(s - step, r, mu).unwrap()) / (step * step);
            assert!(second >= 0.0, "s={s}");
            // H'' = 1/s
            assert!((second - 1.0 / s).abs() < 2e-3 / s, "s={s}");
        }
    }

    #[test]
    fn h_is_nonnegative_on_dense_samples() {
        for &(r, mu) in &[(1.0, 1.0), (1.0, 20.0), (0.1, 3.0), (50.0, 0.5)] {
            let top = 100.0 * r / mu;
            for k in 0..=1_000_000u32 {
                let s = top * k as f64 / 1e6;
                assert!(h(s, r, mu).unwrap() >= -1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn h_nonnegative(s in 0.0f64..1e3, r in 1e-3f64..1e2, mu in 1e-3f64..1e2) {
            prop_assert!(h(s, r, mu).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn equilibrium_has_zero_energy_and_deviation() {
        let (s, p) = equilibrium_state();
        let e = energy(&s, &p, DEFAULT_ENERGY_SHIFT);
        assert_eq!(e.regime, Regime::PositiveR);
        assert_eq!(e.f_value, 0.0);
        let nm = norms(&s, &p);
        assert_eq!(nm.dev_inf, 0.0);
        assert_eq!(nm.grad_w_l2, 0.0);
        assert_eq!(nm.u_linf, 0.0);
    }

    #[test]
    fn nonpositive_regime_cases() {
        let (mut s, mut p) = equilibrium_state();
        p.r = -0.5;
        s.n.values.iter_mut().for_each(|v| *v = 0.0);
        s.w = ScalarField::from_fn(s.grid(), Bc::Neumann, |x, y| x * x + y);
        let e = energy(&s, &p, 10.0);
        assert_eq!(e.regime, Regime::NonPositiveR);
        assert_eq!(e.h_integral, 0.0);
        assert_eq!(e.f_value, 0.5 * p.chi * e.grad_w_sq);
        assert_eq!(e.a, Some(10.0));

        let a: f64 = 2.0;
        s.n.values.iter_mut().for_each(|v| *v = (-a).exp());
        let e = energy(&s, &p, a);
        assert!(e.h_integral.abs() < 1e-15);
    }

    #[test]
    fn indicator_bump_norms() {
        let (mut s, p) = equilibrium_state();
        let g = s.grid();
        s.n = ScalarField::from_fn(g, Bc::Neumann, |x, y| if x < 0.5 && y < 0.5 { 2.0 } else { 0.0 });
        let nm = norms(&s, &p);
        assert!((nm.mass - 0.5).abs() < 1e-14);
        assert_eq!(nm.linf_n, 2.0);
    }

    #[test]
    fn gradient_quadratures_agree() {
        let (mut s, p) = equilibrium_state();
        s.w = ScalarField::from_fn(s.grid(), Bc::Neumann, |x, y| (3.0 * x).sin() * y);
        let nm = norms(&s, &p);
        let e = energy(&s, &p, 1.0);
        assert!((nm.grad_w_l2.powi(2) - e.grad_w_sq).abs() <= 1e-14 * e.grad_w_sq);
        let l2_sq = s.n.values.iter().map(|v| v * v).sum::<f64>() * s.grid().cell_area();
        assert!((nm.l2_n.powi(2) - l2_sq).abs() <= 1e-14 * l2_sq);
    }

    #[test]
    fn derived_constants() {
        let g = Grid::new(16, 8, 2.0, 1.0).unwrap();
        let c = DerivedConstants::new(&g, 2.0, 4.0);
        assert_eq!(c.gamma, 2.0 / 8.0);
        assert!((c.lambda1 - PI * PI / 4.0).abs() < 1e-14);
        assert!(c.cp_dirichlet > c.lambda1);
    }
}
