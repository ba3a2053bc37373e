//! Named base configurations.
//!
//! | name               | r | mu | domain | grid | t_end | initial data           |
//! |--------------------|---|----|--------|------|-------|------------------------|
//! | `default`          | 1 | 1  | 1 x 1  | 32²  | 1     | gauss-bump             |
//! | `logistic-uniform` | 1 | 1  | 1 x 1  | 16²  | 20    | uniform 0.5, no gravity|
//! | `algebraic-decay`  | 0 | 1  | 4 x 4  | 64²  | 100   | gauss-bump             |
//! | `stabilization`    | 1 | 20 | 8 x 8  | 64²  | 30    | vortex-fluid           |
//! | `mu-sweep`         | 1 | 1  | 8 x 8  | 48²  | 20    | gauss-bump             |
//!
//! All use `chi = 0.5`, gravity `(0, -1)` unless noted, and the default
//! bump shape: `n0 = 1 + 2 exp(-|x - x1|^2 / 2 s^2)`, `c0 = 1 - 0.5 x / lx`.

use super::config::{CheckKind, FitSpec, RunConfig};
use crate::chemo::{InitSpec, Preset, SimParams};
use crate::grid::Grid;
use crate::oracles::DecayModel;

pub const NAMES: [&str; 5] = ["default", "logistic-uniform", "algebraic-decay", "stabilization", "mu-sweep"];

fn fit(column: &str, model: DecayModel) -> FitSpec {
    FitSpec { column: column.into(), model }
}

fn square(n: usize, l: f64) -> Grid {
    Grid::square(n, l).expect("preset grids are valid")
}

pub fn default() -> RunConfig {
    let mut cfg = RunConfig::new(SimParams::new(square(32, 1.0)));
    cfg.output_every = 0.05;
    cfg.checks = vec![CheckKind::Positivity, CheckKind::MaxPrinciple];
    cfg
}

pub fn logistic_uniform() -> RunConfig {
    let mut p = SimParams::new(square(16, 1.0));
    p.r = 1.0;
    p.mu = 1.0;
    p.gravity = [0.0, 0.0];
    p.init = InitSpec::uniform(0.5);
    // dt = 0.4 * 2.5e-3 = 1e-3
    p.dt_max = 2.5e-3;
    p.t_end = 20.0;
    let mut cfg = RunConfig::new(p);
    cfg.output_every = 0.05;
    cfg.checks = vec![CheckKind::Positivity, CheckKind::MaxPrinciple];
    cfg
}

pub fn algebraic_decay() -> RunConfig {
    let mut p = SimParams::new(square(64, 4.0));
    p.r = 0.0;
    p.mu = 1.0;
    p.t_end = 100.0;
    let mut cfg = RunConfig::new(p);
    cfg.output_every = 0.5;
    cfg.checks = vec![
        CheckKind::L1Bound,
        CheckKind::NSandwich,
        CheckKind::GradWUpper,
        CheckKind::GradWVanish,
        CheckKind::Positivity,
        CheckKind::MaxPrinciple,
    ];
    cfg.check_window = Some((10.0, 100.0));
    cfg.fits = vec![fit("linf_n", DecayModel::Algebraic), fit("c_max", DecayModel::Algebraic)];
    cfg.fit_window = Some((10.0, 100.0));
    cfg
}

pub fn stabilization() -> RunConfig {
    let mut p = SimParams::new(square(64, 8.0));
    p.r = 1.0;
    p.mu = 20.0;
    p.t_end = 30.0;
    p.init.preset = Preset::VortexFluid;
    let mut cfg = RunConfig::new(p);
    cfg.output_every = 0.25;
    cfg.checks = vec![CheckKind::Positivity, CheckKind::MaxPrinciple, CheckKind::EnergyMonotone];
    cfg.check_window = Some((10.0, 30.0));
    cfg.fits = vec![
        fit("dev_inf", DecayModel::Exponential),
        fit("grad_w_l6", DecayModel::Exponential),
        fit("u_linf", DecayModel::Exponential),
    ];
    cfg.fit_window = Some((10.0, 30.0));
    cfg
}

pub fn mu_sweep() -> RunConfig {
    let mut p = SimParams::new(square(48, 8.0));
    p.r = 1.0;
    p.t_end = 20.0;
    let mut cfg = RunConfig::new(p);
    cfg.output_every = 0.25;
    cfg.checks = vec![CheckKind::Positivity, CheckKind::MaxPrinciple];
    cfg.fits = vec![fit("dev_inf", DecayModel::Exponential)];
    cfg
}

pub fn by_name(name: &str) -> Option<RunConfig> {
    Some(match name {
        "default" => default(),
        "logistic-uniform" => logistic_uniform(),
        "algebraic-decay" => algebraic_decay(),
        "stabilization" => stabilization(),
        "mu-sweep" => mu_sweep(),
        _ => return None,
    })
}
