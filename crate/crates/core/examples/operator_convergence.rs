//! Observed order of the discrete Laplacian, gradient and divergence on a
//! smooth manufactured field as the grid is refined.

use chemoflow::runner::acceptance::{manufactured_errors, CONVERGENCE_GRIDS};

fn main() {
    println!("{:>6} {:>12} {:>12} {:>12}", "n", "laplacian", "gradient", "divergence");
    let mut prev: Option<(f64, f64, f64)> = None;
    for n in CONVERGENCE_GRIDS {
        let e = manufactured_errors(n);
        println!("{n:>6} {:>12.3e} {:>12.3e} {:>12.3e}", e.0, e.1, e.2);
        if let Some(p) = prev {
            println!(
                "{:>6} {:>12.3} {:>12.3} {:>12.3}",
                "order",
                (p.0 / e.0).log2(),
                (p.1 / e.1).log2(),
                (p.2 / e.2).log2()
            );
        }
        prev = Some(e);
    }
}
