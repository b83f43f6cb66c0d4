use std::path::Path;
use std::process::{Command, Output};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corner-gl"))
        .args(args)
        .current_dir(dir)
        .env("CORNER_GL_RESULTS", dir.join("results"))
        .output()
        .unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn unknown_keys_exit_with_validation_code() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("a.toml"), "study = \"corner\"\nmu_grid = [0.8]\nfrobnicate = true\n").unwrap();
    let o = bin(d.path(), &["validate", "a.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["exit_code"], 2);
    assert!(e["message"].as_str().unwrap().contains("frobnicate"));
    std::fs::write(d.path().join("b.toml"), "study = \"corner\"\nmu_grid = [0.8\n").unwrap();
    assert_eq!(bin(d.path(), &["run", "b.toml"]).status.code(), Some(2));
}

#[test]
fn sector_mu_outside_the_window_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("s.json"), r#"{"study": "sector", "mu_grid": [0.3], "mesh": {"h": 0.2}}"#).unwrap();
    let o = bin(d.path(), &["run", "s.json"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr_json(&o)["message"].as_str().unwrap().to_string();
    assert!(msg.contains("(mu_beta, Theta0]"), "{msg}");
    assert!(!d.path().join("results/sector/records.jsonl").exists());
}

#[test]
fn flags_that_do_not_apply_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("t.toml"), "study = \"theta0\"\n").unwrap();
    assert_eq!(bin(d.path(), &["run", "t.toml", "--field-out", "f.csv"]).status.code(), Some(2));
    let o = bin(d.path(), &["run", "t.toml", "--profile-out", "p.csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((summary["theta0"].as_f64().unwrap() - 0.5901065859).abs() < 1e-8);
    assert!(std::fs::read_to_string(d.path().join("p.csv")).unwrap().lines().count() > 100);
}

#[test]
fn defaults_validate() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(d.path(), &["--print-defaults"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for (i, section) in text.split("# ---- ").skip(1).enumerate() {
        let body = section.split_once('\n').unwrap().1;
        let f = format!("d{i}.toml");
        std::fs::write(d.path().join(&f), body).unwrap();
        let v = bin(d.path(), &["validate", &f]);
        assert!(v.status.success(), "{section}: {}", String::from_utf8_lossy(&v.stderr));
    }
}

#[test]
fn coarse_corner_run_writes_everything() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "study = \"corner\"\nname = \"smoke\"\nmu_grid = [0.8]\n[mesh]\nh = 0.25\n[schedule]\nell = [3, 4, 5]\n";
    std::fs::write(d.path().join("c.toml"), cfg).unwrap();
    let o = bin(d.path(), &["--jobs", "2", "run", "c.toml", "--field-out", "f.csv", "--trace-out", "t.csv", "--mesh-out", "m.mesh"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("results/smoke");
    for f in ["records.jsonl", "report.json", "report.csv", "plot.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    for f in ["f.csv", "t.csv", "m.mesh"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let hash = report["config_hash"].as_str().unwrap();
    let lines = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 6);
    assert!(lines.lines().all(|l| l.contains(hash)));

    let shown = bin(d.path(), &["show", "results/smoke/records.jsonl", "kind=corn"]);
    assert!(shown.status.success());
    let table = String::from_utf8(shown.stdout).unwrap();
    assert_eq!(table.lines().count(), 4);
    let none = bin(d.path(), &["show", "results/smoke/records.jsonl", "mu=0.7"]);
    assert_eq!(none.status.code(), Some(1));
    assert_eq!(stderr_json(&none)["message"], "no records");
    assert_eq!(bin(d.path(), &["show", "results/smoke/records.jsonl", "colour=red"]).status.code(), Some(2));

    let p = bin(d.path(), &["plot", "results/smoke/records.jsonl", "--kind", "convergence", "--out", "conv.svg"]);
    assert!(p.status.success());
    assert!(std::fs::read_to_string(d.path().join("conv.svg")).unwrap().contains("corn mu=0.80000"));

    // a rerun appends identical records
    assert!(bin(d.path(), &["run", "c.toml"]).status.success());
    let again = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    let l: Vec<&str> = again.lines().collect();
    assert_eq!(l.len(), 12);
    assert_eq!(l[..6], l[6..]);
}

#[test]
fn missing_records_file_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(bin(d.path(), &["show", "nope.jsonl"]).status.code(), Some(1));
}
