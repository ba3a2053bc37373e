//! Spatially uniform data: the density follows the logistic ODE exactly, so
//! the simulated mean is compared against the closed-form solution.

use chemoflow::oracles::logistic_solution;
use chemoflow::runner::{run, scenarios};

fn main() {
    let cfg = scenarios::logistic_uniform();
    let p = &cfg.params;
    let n0 = p.init.n_base;
    let out = run(&cfg).expect("logistic run");
    let area = p.grid.area();
    let mut worst = 0.0f64;
    println!("{:>8} {:>14} {:>14} {:>10}", "t", "mean n", "logistic", "error");
    for row in &out.rows {
        let exact = logistic_solution(n0, p.r, p.mu, row.t);
        let mean = row.mass / area;
        worst = worst.max((mean - exact).abs() / exact);
        if (row.t / 2.0).fract() < 1e-9 || row.t == p.t_end {
            println!("{:>8.3} {:>14.8} {:>14.8} {:>10.2e}", row.t, mean, exact, (mean - exact).abs());
        }
    }
    println!("max relative error {worst:.3e}");
    println!("equilibrium r/mu = {}", p.equilibrium());
}
