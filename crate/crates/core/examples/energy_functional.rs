//! Tracks the Lyapunov-type energy along a short coupled run and reports its
//! largest step-to-step increase.

use chemoflow::chemo::{advance, init_state, Preset, SimParams};
use chemoflow::fluid::FluidConfig;
use chemoflow::functionals::{energy, norms, DEFAULT_ENERGY_SHIFT};
use chemoflow::grid::Grid;

fn main() {
    let mut p = SimParams::new(Grid::square(32, 4.0).unwrap());
    p.r = 1.0;
    p.mu = 2.0;
    p.t_end = 3.0;
    p.init.preset = Preset::VortexFluid;
    let fluid = FluidConfig::default();
    let mut s = init_state(&p).unwrap();
    let mut prev = energy(&s, &p, DEFAULT_ENERGY_SHIFT).f_value;
    let mut worst = f64::NEG_INFINITY;
    let mut next_print = 0.0;
    while s.t < p.t_end {
        if s.t >= next_print {
            let e = energy(&s, &p, DEFAULT_ENERGY_SHIFT);
            let nm = norms(&s, &p);
            println!("t {:>6.3}  F {:.8e}  int H {:.4e}  |grad w|^2 {:.4e}  dev_inf {:.3e}", s.t, e.f_value, e.h_integral, e.grad_w_sq, nm.dev_inf);
            next_print += 0.5;
        }
        advance(&mut s, &p, &fluid, p.t_end).expect("step");
        let f = energy(&s, &p, DEFAULT_ENERGY_SHIFT).f_value;
        worst = worst.max(f - prev);
        prev = f;
    }
    println!("largest increment {worst:.3e}");
}
