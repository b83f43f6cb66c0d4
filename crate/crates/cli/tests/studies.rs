use std::path::PathBuf;
use std::process::Command;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let o = Command::new(env!("CARGO_BIN_EXE_corner-gl")).arg("validate").arg(&path).output().unwrap();
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn coarse_continuity_run_reports_a_status() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_corner-gl"))
        .arg("run")
        .arg(configs().join("continuity-coarse.toml"))
        .env("CORNER_GL_RESULTS", d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = d.path().join("continuity-coarse");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["pass"].is_boolean());
    assert!(["PASS", "FAIL"].contains(&report["status"].as_str().unwrap()));
    for k in ["corner_above", "sector_below", "dirichlet_corner"] {
        assert!(report["estimates"][k]["value"].as_f64().unwrap() < 0.0, "{k}");
    }
    let svg = std::fs::read_to_string(dir.join("plot.svg")).unwrap();
    assert!(svg.contains("corner (mu &gt; Theta0)") && svg.contains("sector (mu &lt; Theta0)") && svg.contains("vline Theta0"));
}
