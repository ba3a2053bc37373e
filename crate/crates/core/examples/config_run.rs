//! Loads a text configuration, applies overrides and writes the diagnostics
//! CSV to the temporary directory.
//!
//! `cargo run --example config_run -- examples/configs/bump.conf t_end=2`

use chemoflow::runner::{run, RunConfig};

const FALLBACK: &str = "\
nx = 24
ny = 24
init = two-bump
t_end = 0.5
output_every = 0.1
checks = positivity, max-principle
";

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next();
    let overrides: Vec<String> = args.collect();
    let mut cfg = match &path {
        Some(p) => RunConfig::from_file(p.as_ref(), &overrides),
        None => RunConfig::parse(FALLBACK, &overrides),
    }
    .unwrap_or_else(|e| {
        eprintln!("config error: {e}");
        std::process::exit(2);
    });
    let out_path = std::env::temp_dir().join("chemoflow_example.csv");
    cfg.out_path = Some(out_path.clone());
    print!("{}", cfg.to_config_string());
    let out = run(&cfg).unwrap_or_else(|e| {
        eprintln!("run error: {e}");
        std::process::exit(e.exit_code());
    });
    for c in &out.checks {
        println!("check {:<16} {}", c.kind.name(), if c.passed() { "ok" } else { "FAIL" });
    }
    println!("{} rows written to {}", out.rows.len(), out_path.display());
}
