//! Logistic growth with a stirring vortex: the density relaxes to `r/mu` and
//! the flow decays, both at exponential rates.

use chemoflow::runner::{run, scenarios};

fn main() {
    let cfg = scenarios::stabilization();
    let out = run(&cfg).expect("stabilization run");
    let last = out.rows.last().unwrap();
    println!("steps {} t_end {}", out.trace.len() - 1, last.t);
    println!("final dev_inf {:.3e} u_linf {:.3e}", last.dev_inf, last.u_linf);
    for f in &out.fits {
        match &f.outcome {
            Ok(d) => println!("{:<10} rate {:.4}  amplitude {:.3e}  r2 {:.6}", f.spec.column, d.rate, d.amplitude, d.r_squared),
            Err(e) => println!("{:<10} fit failed: {e}", f.spec.column),
        }
    }
    for c in &out.checks {
        println!("check {:<16} {}", c.kind.name(), if c.passed() { "ok" } else { "FAIL" });
    }
}
