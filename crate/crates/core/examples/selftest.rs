//! Runs a subset of the acceptance criteria; pass ids as arguments, e.g.
//! `cargo run --release --example selftest -- 1 2 3 10`.

use chemoflow::runner::acceptance::{render, selftest};

fn main() {
    let mut ids: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if ids.is_empty() {
        ids = vec![1, 2, 3, 10];
    }
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let reports = selftest(&ids, jobs, false);
    print!("{}", render(&reports));
    if reports.iter().any(|r| !r.passed) {
        std::process::exit(1);
    }
}
