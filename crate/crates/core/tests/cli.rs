use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chemoflow"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn chemoflow")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "\
# short coupled run
nx = 16
ny = 16
t_end = 0.5
output_every = 0.1
checks = positivity, max-principle
";

#[test]
fn run_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    let o = run_in(dir.path(), &["run", "small.conf", "--out", "out.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(stdout(&o).contains("check positivity"));
}

#[test]
fn set_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    let o = run_in(dir.path(), &["run", "small.conf", "--set", "t_end=0.2", "--out", "a.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.conf"), "chi = banana\n").unwrap();
    assert_eq!(run_in(dir.path(), &["run", "bad.conf"]).status.code(), Some(2));
    assert_eq!(run_in(dir.path(), &["run", "missing.conf"]).status.code(), Some(2));
    std::fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    let o = run_in(dir.path(), &["run", "small.conf", "--out", "no/such/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("no").exists());
}

#[test]
fn fit_subcommand_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,v\n");
    for k in 0..=40 {
        let t = k as f64 * 0.5;
        csv.push_str(&format!("{t},{}\n", 3.0 * (-0.25 * t).exp()));
    }
    std::fs::write(dir.path().join("s.csv"), csv).unwrap();
    let o = run_in(dir.path(), &["fit", "s.csv", "--column", "v", "--model", "exp", "--window", "2,18"]);
    assert_eq!(o.status.code(), Some(0));
    let rate: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("rate "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((rate - 0.25).abs() < 1e-10);
    let o = run_in(dir.path(), &["fit", "s.csv", "--column", "nope", "--model", "exp", "--window", "2,18"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_in(dir.path(), &["fit", "s.csv", "--column", "v", "--model", "exp", "--window", "2,3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_subcommand_sorts_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    let o = run_in(dir.path(), &["sweep", "small.conf", "--mu", "4,1,4", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1.0000000000000000e0,true,true"));
    assert_eq!(lines[2], lines[3]);
    assert_eq!(run_in(dir.path(), &["sweep", "small.conf", "--mu", "-1"]).status.code(), Some(2));
}

#[test]
fn selftest_subset_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), &["selftest", "--only", "1,2,10"]);
    let b = run_in(dir.path(), &["selftest", "--only", "1,2,10"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("3/3 criteria passed"));
}

#[test]
fn canary_flip_fails_operator_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["selftest", "--only", "1", "--canary-flip-laplacian"]);
    assert_ne!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.contains("operator-convergence")).unwrap();
    assert!(line.starts_with("[FAIL]"), "{line}");
    assert!(line.contains("FAILED laplacian"), "{line}");
}
