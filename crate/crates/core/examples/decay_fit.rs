//! Fits exponential and algebraic decay models to a diagnostics column of a
//! CSV file, or to a synthetic series when no file is given.
//!
//! `cargo run --example decay_fit -- out.csv dev_inf 5 30`

use chemoflow::oracles::{fit_decay, DecayModel};
use chemoflow::runner::csv::read_series;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (series, window) = if let [path, column, a, b] = args.as_slice() {
        let text = std::fs::read_to_string(path).expect("read csv");
        let series = read_series(&text, column).expect("column");
        (series, (a.parse().expect("window start"), b.parse().expect("window end")))
    } else {
        let series = (0..=200).map(|k| {
            let t = 0.1 * k as f64;
            (t, 2.0 * (-0.4 * t).exp() * (1.0 + 0.01 * (3.0 * t).sin()))
        });
        (series.collect(), (2.0, 20.0))
    };
    for model in [DecayModel::Exponential, DecayModel::Algebraic] {
        match fit_decay(&series, model, window) {
            Ok(f) => println!("{model:<4} rate {:.6}  amplitude {:.4e}  r2 {:.6}  samples {}", f.rate, f.amplitude, f.r_squared, f.samples),
            Err(e) => println!("{model:<4} {e}"),
        }
    }
}
