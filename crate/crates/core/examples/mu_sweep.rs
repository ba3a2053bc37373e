//! Runs one configuration over several values of `mu` in parallel and prints
//! the sweep table.

use chemoflow::runner::sweep::sweep_csv;
use chemoflow::runner::{scenarios, sweep_mu};

fn main() {
    let mut base = scenarios::mu_sweep();
    // keep the example quick; the acceptance suite runs the full horizon
    base.params.t_end = 5.0;
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let rows = sweep_mu(&base, &[0.5, 2.0, 8.0, 32.0], jobs).expect("sweep");
    print!("{}", sweep_csv(&rows));
}
