use chemoflow::oracles::{fit_decay, DecayModel};
use chemoflow::runner::acceptance::{render, selftest};
use chemoflow::runner::csv::read_series;
use chemoflow::runner::sweep::{sweep_csv, sweep_mu, write_sweep};
use chemoflow::runner::{run, RunConfig};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "chemoflow", version, about = "Chemotaxis-fluid simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a config file.
    Run {
        config: PathBuf,
        /// CSV destination (overrides out_path).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a config key, e.g. --set mu=4.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the config once per mu value.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Summary CSV destination (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Fit a decay model to one CSV column.
    Fit {
        csv: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        model: DecayModel,
        /// Fit window as start,end.
        #[arg(long, value_delimiter = ',', required = true)]
        window: Vec<f64>,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Criterion numbers to run, e.g. --only 1,2.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, hide = true)]
        canary_flip_laplacian: bool,
    },
}

const CONFIG_ERROR: u8 = 2;
const NUMERICAL_FAILURE: u8 = 1;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load(config: &Path, set: &[String]) -> Result<RunConfig, ExitCode> {
    RunConfig::from_file(config, set).map_err(|e| fail(CONFIG_ERROR, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, set } => {
            let mut cfg = match load(&config, &set) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if out.is_some() {
                cfg.out_path = out;
            }
            let output = match run(&cfg) {
                Ok(o) => o,
                Err(e) => return fail(e.exit_code() as u8, e),
            };
            let last = output.rows.last().expect("at least the initial row");
            println!("t_end {} rows {} steps {}", last.t, output.rows.len(), output.trace.len() - 1);
            println!("final mass {:.6e} dev_inf {:.6e} u_linf {:.6e}", last.mass, last.dev_inf, last.u_linf);
            let mut ok = true;
            for c in &output.checks {
                match &c.outcome {
                    Ok(b) => println!(
                        "check {:<16} {} statistic {:.6e} satisfied {:.3}",
                        c.kind.name(),
                        if b.passed() { "pass" } else { "FAIL" },
                        b.statistic,
                        b.satisfied_fraction
                    ),
                    Err(e) => println!("check {:<16} FAIL {e}", c.kind.name()),
                }
                ok &= c.passed();
            }
            for f in &output.fits {
                match &f.outcome {
                    Ok(d) => println!(
                        "fit {} on [{}, {}]: rate {:.6e} amplitude {:.6e} r2 {:.6}",
                        f.spec, f.window.0, f.window.1, d.rate, d.amplitude, d.r_squared
                    ),
                    Err(e) => println!("fit {}: {e}", f.spec),
                }
            }
            if let Some(p) = &cfg.out_path {
                println!("wrote {}", p.display());
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(NUMERICAL_FAILURE)
            }
        }
        Command::Sweep { config, mu, jobs, out, set } => {
            let cfg = match load(&config, &set) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(p) = &out {
                if let Err(e) = chemoflow::runner::run::validate_out_path(p) {
                    return fail(CONFIG_ERROR, e);
                }
            }
            let rows = match sweep_mu(&cfg, &mu, jobs) {
                Ok(r) => r,
                Err(e) => return fail(CONFIG_ERROR, e),
            };
            match &out {
                Some(p) => {
                    if let Err(e) = write_sweep(p, &rows) {
                        return fail(NUMERICAL_FAILURE, e);
                    }
                    println!("wrote {}", p.display());
                }
                None => print!("{}", sweep_csv(&rows)),
            }
            if rows.iter().all(|r| r.completed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(NUMERICAL_FAILURE)
            }
        }
        Command::Fit { csv, column, model, window } => {
            if window.len() != 2 {
                return fail(CONFIG_ERROR, "--window takes exactly two values: start,end");
            }
            let text = match std::fs::read_to_string(&csv) {
                Ok(t) => t,
                Err(e) => return fail(CONFIG_ERROR, format!("{}: {e}", csv.display())),
            };
            let series = match read_series(&text, &column) {
                Ok(s) => s,
                Err(e) => return fail(CONFIG_ERROR, e),
            };
            match fit_decay(&series, model, (window[0], window[1])) {
                Ok(f) => {
                    println!("model {}", f.model);
                    println!("rate {:.16e}", f.rate);
                    println!("amplitude {:.16e}", f.amplitude);
                    println!("r_squared {:.16e}", f.r_squared);
                    println!("samples {}", f.samples);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(NUMERICAL_FAILURE, e),
            }
        }
        Command::Selftest { only, jobs, canary_flip_laplacian } => {
            let reports = selftest(&only, jobs, canary_flip_laplacian);
            print!("{}", render(&reports));
            if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(NUMERICAL_FAILURE)
            }
        }
    }
}
