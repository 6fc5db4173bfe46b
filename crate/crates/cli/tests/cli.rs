use std::path::Path;
use std::process::{Command, Output};

fn mida(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mida")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("cov.json");
    std::fs::write(
        &path,
        r#"{"p":10,"d":2,"r":2,"n_list":[200],"replications":5,"alpha_pc":0.01,
            "level":0.95,"seed":1,"graph_mode":"estimated"}"#,
    )
    .unwrap();
    path
}

#[test]
fn coverage_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = mida(&[
            "--threads",
            threads,
            "coverage",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
    }
    for f in ["coverage.csv", "coverage_eta.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let resolved = std::fs::read_to_string(a.join("config.json")).unwrap();
    assert!(resolved.contains("\"seed\": 7"));
}

#[test]
fn estimate_reports_one_row_per_mediator() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = mida(&["simulate", "--p", "5", "--d", "1", "--n", "500", "--seed", "3", "--out", sim.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let res = dir.path().join("res.csv");
    let o = mida(&[
        "estimate",
        "--data",
        sim.join("data.csv").to_str().unwrap(),
        "--alpha",
        "0.01",
        "--out",
        res.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&res).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "j,theta1j_hat,aver_theta,eta_hat,se,t_stat,p_value,ci_low,ci_high,n_parent_sets,mec_size");
    assert_eq!(lines.len(), 4);

    // the same data with the true mediator CPDAG
    let o = mida(&[
        "estimate",
        "--data",
        sim.join("data.csv").to_str().unwrap(),
        "--cpdag",
        sim.join("mediator_cpdag.txt").to_str().unwrap(),
        "--out",
        res.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mida(&["coverage", "--config", dir.path().join("nope.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"p\": 10,\n  oops\n}").unwrap();
    let o = mida(&["fdr", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn invalid_override_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    let o = mida(&["coverage", "--config", cfg.to_str().unwrap(), "--set", "level=2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = mida(&["coverage", "--config", cfg.to_str().unwrap(), "--graph-mode", "guess", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_subcommand_exits_2() {
    let o = mida(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn wdensity_writes_requested_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = mida(&["wdensity", "--rho", "0,0.5", "--samples", "50", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("wdensity.csv")).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert_eq!(text.lines().next().unwrap(), "rho,w");
}
