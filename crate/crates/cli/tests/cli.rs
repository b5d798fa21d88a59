use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn optree(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optree"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn empty_input_gives_uniform_grid() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    for est in ["mean", "hmap"] {
        let out = format!("out-{est}");
        let o = optree(&["estimate", "--input", "empty.csv", "--estimator", est, "--grid", "8", "--output", &out], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let grid = fs::read_to_string(dir.path().join(&out).join("density_grid.csv")).unwrap();
        let mut lines = grid.lines();
        assert_eq!(lines.next(), Some("x0_lower,x0_upper,density"));
        let values: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(values.len(), 8);
        assert!(values.iter().all(|v| (v - 1.0).abs() < 1e-12), "{values:?}");
        let meta = json(&dir.path().join(&out).join("metadata.json"));
        assert_eq!(meta["format_version"], 1);
        assert_eq!(meta["input"]["rows"], 0);
    }
}

#[test]
fn simulate_is_deterministic_and_rejects_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.csv", "b.csv"] {
        let o = optree(&["simulate", "--generator", "beta-mixture", "-n", "100", "--seed", "4", "--output", name], d);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(fs::read_to_string(d.join("a.csv")).unwrap().lines().count(), 100);
    let meta = json(&d.join("a.meta.json"));
    assert_eq!(meta["n"], 100);
    let o = optree(&["simulate", "--generator", "BetaMixture", "-n", "0", "--output", "c.csv"], d);
    assert_ne!(code(&o), 0);
    let o = optree(&["simulate", "--generator", "nope", "-n", "10", "--output", "c.csv"], d);
    assert_eq!(code(&o), 2);
}

#[test]
fn sample_prior_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = optree(&["sample-prior", "--rho", "1", "--draws", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let draws = v["draws"].as_array().unwrap();
    assert_eq!(draws.len(), 3);
    for d in draws {
        assert_eq!(d["root"]["node"], "leaf");
        assert_eq!(d["depth_reached"], 0);
    }
    let o = optree(&["sample-prior", "--max-depth", "0"], dir.path());
    assert_eq!(code(&o), 2);
    let o = optree(&["sample-prior", "--rho", "1.5"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn oracle_check_bounds() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&optree(&["oracle-check", "-p", "4", "-n", "1"], dir.path())), 2);
    assert_eq!(code(&optree(&["oracle-check", "-p", "2", "-n", "6"], dir.path())), 2);
    assert_eq!(code(&optree(&["oracle-check", "-p", "2", "-n", "2", "--trials", "0"], dir.path())), 2);
    let o = optree(&["oracle-check", "-p", "2", "-n", "3", "--trials", "10"], dir.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("pts.csv"), "0.1,0.2\n0.7,0.8\n0.71,0.79\n").unwrap();
    fs::write(
        d.join("run.toml"),
        "scheme = \"cycling\"\nrho = 0.3\nestimator = \"mean\"\ngrid = 4\ninput = \"pts.csv\"\noutput = \"out\"\n",
    )
    .unwrap();
    let o = optree(&["estimate", "--config", "run.toml", "--rho", "0.6"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&d.join("out/metadata.json"));
    assert_eq!(meta["config"]["rho"].as_f64(), Some(0.6));
    assert_eq!(meta["config"]["scheme"], "cycling");
    assert_eq!(meta["config"]["estimator"], "mean");
    assert_eq!(fs::read_to_string(d.join("out/density_grid.csv")).unwrap().lines().count(), 17);
    fs::write(d.join("bad.toml"), "colour = 1\n").unwrap();
    assert_eq!(code(&optree(&["estimate", "--config", "bad.toml"], d)), 2);
}

#[test]
fn data_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.csv"), "0.1\n0.2,0.3\n").unwrap();
    assert_eq!(code(&optree(&["estimate", "--input", "bad.csv"], d)), 3);
    fs::write(d.join("text.csv"), "0.1\nfoo\n").unwrap();
    let o = optree(&["estimate", "--input", "text.csv"], d);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
    fs::write(d.join("wide.csv"), "1.5\n").unwrap();
    let o = optree(&["estimate", "--input", "wide.csv"], d);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--rescale"));
    let o = optree(&["estimate", "--input", "wide.csv", "--rescale", "--estimator", "mean", "--output", "o"], d);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&optree(&["estimate", "--input", "missing.csv"], d)), 3);
}

#[test]
fn table_data_uses_state_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("t.csv"), "1,2\n2,2\n1,1\n").unwrap();
    let o = optree(&["estimate", "--input", "t.csv", "--scheme", "table", "--output", "o"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let grid = fs::read_to_string(d.join("o/density_grid.csv")).unwrap();
    assert!(grid.starts_with("x0,x1,density\n"));
    assert_eq!(grid.lines().count(), 5);
    fs::write(d.join("t3.csv"), "3,1\n").unwrap();
    assert_eq!(code(&optree(&["estimate", "--input", "t3.csv", "--scheme", "table"], d)), 3);
}
