//! Degenerate growth (`r = 0`): the density decays like `1/t`. Pass a shorter
//! end time as the first argument for a quick look.

use chemoflow::oracles::{fit_decay, DecayModel};
use chemoflow::runner::{run, scenarios};

fn main() {
    let mut cfg = scenarios::algebraic_decay();
    if let Some(t_end) = std::env::args().nth(1).and_then(|s| s.parse::<f64>().ok()) {
        cfg.params.t_end = t_end;
        cfg.check_window = Some((t_end / 10.0, t_end));
        cfg.fit_window = Some((t_end / 10.0, t_end));
    }
    let out = run(&cfg).expect("algebraic run");
    for c in &out.checks {
        match &c.outcome {
            Ok(b) => println!("check {:<16} {} worst {:.3e} stat {:.4}", c.kind.name(), if b.passed() { "ok  " } else { "FAIL" }, b.worst_violation, b.statistic),
            Err(e) => println!("check {:<16} FAIL {e}", c.kind.name()),
        }
    }
    let window = cfg.fit_window.unwrap();
    for col in ["linf_n", "c_max", "mass"] {
        match fit_decay(&out.series(col), DecayModel::Algebraic, window) {
            Ok(f) => println!("{col:<8} ~ t^-{:.4}  r2 {:.6}", f.rate, f.r_squared),
            Err(e) => println!("{col:<8} fit failed: {e}"),
        }
    }
}
