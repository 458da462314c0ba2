use std::fs;
use std::process::Command;

use chainsim_cli::CliError;

fn chainsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chainsim"))
}

#[test]
fn bad_config_exits_2_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "L = -1\n[dynamics]\nstep = 3\n").unwrap();
    let out = chainsim().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "config");
    let lines: Vec<u64> = err["problems"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["line"].as_u64().unwrap())
        .collect();
    assert_eq!(lines, vec![1, 3]);
}

#[test]
fn oversized_space_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.toml");
    fs::write(&cfg, "L = 14\ntrajectories = 1\ncycles = 1\n").unwrap();
    let out = chainsim()
        .args(["oracle", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let err: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/error.json")).unwrap()).unwrap();
    assert_eq!(err["kind"], "capacity");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "error");
}

#[test]
fn numeric_failures_map_to_3() {
    let e = CliError::Core(chainsim::Error::NumericalIntegrity("trace".into()));
    assert_eq!(e.exit_code(), 3);
    assert_eq!(e.to_json()["kind"], "numeric");
    let e = CliError::Core(chainsim::Error::Capacity("dim".into()));
    assert_eq!(e.exit_code(), 4);
}

#[test]
fn estimate_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = chainsim().arg("estimate").arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let table = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert!(table.starts_with("quantity,L,parameter,unit,value\n"));
    assert!(table.contains("density_matrix_bytes,10,cavity_cap=2,bytes,52613349376\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["version"], chainsim_cli::VERSION);
}

#[test]
fn instance_is_printed_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = chainsim()
            .args(["instance", "--seed", seed, "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success());
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let a = run("3");
    let b = run("3");
    let c = run("4");
    assert_eq!(a, b);
    assert_ne!(a["instances"], c["instances"]);
    assert_eq!(a["instances"][0]["sites"], 4);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "L = 3\ntrajectories = 6\ncycles = 2\n").unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "3"].into_iter().enumerate() {
        let o = dir.path().join(format!("r{k}"));
        let status = chainsim()
            .args(["run", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&o)
            .status()
            .unwrap();
        assert!(status.success());
        let csv = fs::read_to_string(o.join("observables.csv")).unwrap();
        assert!(csv.starts_with("instance,cycle,observable,unit,value,stderr\n"));
        outputs.push((csv, fs::read(o.join("distributions.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn stats_compares_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "L = 3\ntrajectories = 4\ncycles = 1\nnegativity = false\n").unwrap();
    let o = dir.path().join("a");
    assert!(chainsim().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&o).status().unwrap().success());
    let d = o.join("distributions.json");
    let out = chainsim()
        .arg("stats")
        .arg(&d)
        .arg(&d)
        .arg("--out")
        .arg(dir.path().join("s"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["comparisons"][0]["kl_candidate_reference"], 0.0);
}
