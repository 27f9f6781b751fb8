use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fbsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbsplit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = \"linear1d\"\nschedule = \"constant\"\nk_max = 100\nseed = 1\n");
    let out = dir.path().join("out");
    let run = fbsplit(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(read_csv(&out.join("trace_linear1d.csv")).len(), 101);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "simulate");
    assert_eq!(summary["passed"], true);
}

#[test]
fn dry_run_validates_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = fbsplit(&["equivalence", "--seed", "3", "--dry-run", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok:"));
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fbsplit(&["simulate", "--dry-run"]).status.code(), Some(2), "missing seed");
    let cfg = write_config(dir.path(), "seed = 1\nstep_size = 0.1\n");
    assert_eq!(fbsplit(&["simulate", "--config", &cfg]).status.code(), Some(2), "unknown key");
    let cfg = write_config(dir.path(), "seed = 1\nproblem = \"heat\"\n");
    assert_eq!(fbsplit(&["simulate", "--config", &cfg]).status.code(), Some(2), "unknown problem");
    let cfg = write_config(dir.path(), "seed = 1\nexperiment = \"benilan\"\n");
    assert_eq!(fbsplit(&["simulate", "--config", &cfg]).status.code(), Some(2), "experiment mismatch");
    let cfg = write_config(dir.path(), "seed = 1\nproblem = \"linear1d\"\nstep = 5.0\n");
    assert_eq!(fbsplit(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]).status.code(), Some(2), "step above the limit");
}

#[test]
fn budget_exhaustion_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nproblem = \"l1_quadratic\"\nbudget = 100\n");
    let run = fbsplit(&["flow-convergence", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn failed_criterion_exits_with_one() {
    // the 2-D lasso contracts at rate ~0.43, too slowly to reach 2e-3 by T = 10
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nproblem = \"l1_quadratic\"\nx0_set = [[2.0, -1.5]]\n");
    let out = dir.path().join("out");
    let run = fbsplit(&["equivalence", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stdout).contains("FAIL l1_quadratic:flow_to_zero"));
    assert!(out.join("equivalence_l1_quadratic.csv").exists());
}

#[test]
fn verify_bounds_on_lasso_with_seed_seven() {
    let dir = tempfile::tempdir().unwrap();
    let run = fbsplit(&["verify-bounds", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let rows = read_csv(&dir.path().join("bounds.csv"));
    let lasso = rows.iter().find(|r| &r[6] == "l1_quadratic").unwrap();
    let slack: f64 = lasso[2].parse().unwrap();
    assert!(slack >= -1e-9);
    assert_eq!(&lasso[5], "7");
}

#[test]
fn flow_convergence_on_linear1d() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nproblem = \"linear1d\"\nm_list = [4, 16, 64, 256]\n");
    let run = fbsplit(&["flow-convergence", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let rows = read_csv(&dir.path().join("flow_convergence.csv"));
    assert_eq!(rows.len(), 4);
    let errors: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
    for r in &rows {
        let (err, bound): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!(err <= bound);
    }
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    for experiment in ["verify-bounds", "verify-lemma", "benilan", "almost-orbit"] {
        let a = dir.path().join(format!("{experiment}-a"));
        let b = dir.path().join(format!("{experiment}-b"));
        let args = |out: &Path, jobs: &'static str| {
            fbsplit(&[experiment, "--seed", "11", "--jobs", jobs, "--out", out.to_str().unwrap()])
        };
        assert_eq!(args(&a, "1").status.code(), Some(0));
        assert_eq!(args(&b, "4").status.code(), Some(0));
        let mut names: Vec<_> = fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{experiment}: {n:?}");
        }
    }
}
