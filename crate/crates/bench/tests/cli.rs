use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtm-bench"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn traces(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "summary.json")
        .collect();
    v.sort();
    v
}

const BASE: &str = "[solver]\nid = \"base\"\n[problem]\nid = \"quad_well\"\n[plan]\nsteps = 100\n";

#[test]
fn base_run_writes_header_and_all_records() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "base.toml", BASE);
    let out = bench(&["run", "--config", &cfg, "--out", "t"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = traces(&tmp.path().join("t"));
    assert_eq!(files.len(), 1);
    assert!(files[0].ends_with("base-quad_well-seed0000.csv"));
    let text = std::fs::read_to_string(&files[0]).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // JSON header, column header, k = 0..=100
    assert_eq!(lines.len(), 103);
    assert!(lines[0].starts_with("{\"schema\":\"mtm-trace/1\""));
    assert_eq!(lines[1], "k,f_x,f_y,alpha,A,L_k,m_k,calls_f,calls_g,V_to_opt");
    assert!(lines[102].starts_with("100,"));
    assert!(tmp.path().join("t/summary.json").exists());
}

#[test]
fn unknown_solver_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "bad.toml", &BASE.replace("\"base\"", "\"newton\""));
    let out = bench(&["run", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "CONFIG_UNKNOWN_SOLVER");
    assert!(!tmp.path().join("traces").exists());
}

#[test]
fn unknown_field_and_failed_precondition_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "typo.toml", &format!("{BASE}stepz = 3\n"));
    let out = bench(&["run", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "CONFIG_PARSE");

    let cfg = config(
        tmp.path(),
        "dir.toml",
        "[solver]\nid = \"directional\"\n[problem]\nid = \"quad_box\"\n[plan]\nepsilon = 0.1\n",
    );
    let out = bench(&["run", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "CONFIG_PRECONDITION");
}

#[test]
fn verify_passes_on_base_and_inexact_traces() {
    let tmp = TempDir::new().unwrap();
    let base = config(tmp.path(), "base.toml", BASE);
    let inexact = config(
        tmp.path(),
        "inexact.toml",
        "[solver]\nid = \"inexact\"\n[problem]\nid = \"quad_ill\"\n[oracle]\ndelta = 1e-4\n[plan]\nsteps = 300\nl0 = 0.1\n",
    );
    assert!(bench(&["run", "--config", &base, "--out", "a"], tmp.path()).status.success());
    assert!(bench(&["run", "--config", &inexact, "--out", "b", "--format", "json"], tmp.path()).status.success());
    let out = bench(&["verify", "a", "b"], tmp.path());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{report}");
    assert!(report.contains("envelope_4LR2"));
    assert!(report.contains("envelope_8LR2_2kdelta"));
    assert!(report.contains("calls_f"));
    assert!(!report.contains(",fail,"));
}

#[test]
fn tampered_trace_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "base.toml", BASE);
    assert!(bench(&["run", "--config", &cfg, "--out", "t"], tmp.path()).status.success());
    let path = &traces(&tmp.path().join("t"))[0];
    let text = std::fs::read_to_string(path).unwrap();
    // raise the objective at k = 50 well above the envelope
    let tampered: String = text
        .lines()
        .map(|l| {
            if l.starts_with("50,") {
                let mut f: Vec<String> = l.split(',').map(String::from).collect();
                f[1] = "10.0".into();
                f.join(",")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    std::fs::write(path, tampered).unwrap();
    let out = bench(&["verify", "--format", "json", "t"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let fails: Vec<&serde_json::Value> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["outcome"] == "fail")
        .collect();
    assert!(fails.iter().any(|r| r["check"] == "integrity"));
    assert!(fails.iter().any(|r| r["check"] == "envelope_4LR2" && r["k"] == 50));
}

#[test]
fn replay_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "zo.toml",
        "[solver]\nid = \"zeroth_order\"\n[problem]\nid = \"quad_well\"\n[plan]\nepsilon = 0.05\n",
    );
    for dir in ["r1", "r2"] {
        let out = bench(&["run", "--config", &cfg, "--seed", "7", "--seeds", "4", "--out", dir], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = traces(&tmp.path().join("r1"));
    assert_eq!(a.len(), 4);
    assert!(a[0].ends_with("zeroth_order-quad_well-seed0007.csv"));
    for f in a.iter().chain([&tmp.path().join("r1/summary.json")]) {
        let twin = tmp.path().join("r2").join(f.file_name().unwrap());
        assert_eq!(std::fs::read(f).unwrap(), std::fs::read(twin).unwrap(), "{}", f.display());
    }
}

#[test]
fn stochastic_batch_writes_every_seed_and_verifies() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "sto.toml",
        "[solver]\nid = \"stochastic\"\n[problem]\nid = \"quad_box_interior\"\n[oracle]\nvariance = 0.002\n\
         [plan]\nepsilon = 0.05\nbeta = 0.05\n[run]\nseeds = [0]\n",
    );
    let out = bench(&["run", "--config", &cfg, "--seeds", "200", "--out", "s"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(traces(&tmp.path().join("s")).len(), 200);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("s/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 200);
    let out = bench(&["verify", "s"], tmp.path());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{report}");
    assert!(report.contains("batch:stochastic:quad_box_interior:200 runs,failure_fraction"));
}

#[test]
fn directional_batch_checks_the_mean_gap() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "dir.toml",
        "[solver]\nid = \"directional\"\n[problem]\nid = \"quad_well\"\n[plan]\nepsilon = 0.01\n",
    );
    assert!(bench(&["run", "--config", &cfg, "--seeds", "40", "--out", "d"], tmp.path()).status.success());
    let out = bench(&["verify", "d", "--out", "report.csv"], tmp.path());
    assert!(out.status.success());
    let report = std::fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    let row = report.lines().find(|l| l.contains("mean_gap_3eps")).unwrap();
    assert!(row.contains(",pass,"), "{row}");

    // a single run cannot establish an expectation bound
    assert!(bench(&["run", "--config", &cfg, "--out", "one"], tmp.path()).status.success());
    let out = bench(&["verify", "one"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains(",unverifiable,"));
}

#[test]
fn sweep_runs_and_verifies_each_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "inexact.toml",
        "[solver]\nid = \"inexact\"\n[problem]\nid = \"quad_well\"\n[plan]\nsteps = 100\nl0 = 1.0\n",
    );
    let out = bench(&["sweep", "--config", &cfg, "--param", "oracle.delta=0,1e-4,1e-3", "--out", "sw"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for v in ["0", "1e-4", "1e-3"] {
        let dir = tmp.path().join(format!("sw/oracle.delta={v}"));
        assert_eq!(traces(&dir).into_iter().filter(|p| p.extension().unwrap() == "csv").count(), 1);
        assert!(dir.join("report.json").exists());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("sw/sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["points"].as_array().unwrap().len(), 3);

    let out = bench(&["sweep", "--config", &cfg, "--param", "oracle.delta=0,abc"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn list_names_every_problem() {
    let tmp = TempDir::new().unwrap();
    let out = bench(&["list", "--format", "json"], tmp.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["problems"].as_array().unwrap().len(), 8);
    assert!(v["solvers"].as_array().unwrap().iter().any(|s| s == "zeroth_order"));
}
