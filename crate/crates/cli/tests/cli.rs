use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn cloudlapse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloudlapse")).args(args).env_remove("CLOUDLAPSE_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn passing_run_exits_zero_and_lists_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = cloudlapse(&[scenario("virial.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "pass");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config"]["scenario"]["kind"], "virial-certify");
    let arts = m["artifacts"].as_array().unwrap();
    assert!(!arts.is_empty());
    for a in arts {
        assert!(dir.path().join(a["path"].as_str().unwrap()).is_file(), "{a}");
    }
    let csv = std::fs::read_to_string(dir.path().join("virial.csv")).unwrap();
    assert!(csv.starts_with("t,R,F\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn falsified_bound_exits_two_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = cloudlapse(&[scenario("bootstrap_inflated.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let m = manifest(dir.path());
    assert_eq!(m["status"], "falsified");
    assert_eq!(m["conforming"], false);
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("bootstrap.json")).unwrap()).unwrap();
    assert!(cert["witness"]["t"].as_f64().is_some());
}

#[test]
fn missing_output_directory_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let gone = dir.path().join("nope");
    let out = cloudlapse(&[scenario("virial.json").to_str().unwrap(), "--out", gone.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(!gone.exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&cloudlapse(&[])), 1);
    assert_eq!(code(&cloudlapse(&["x.json", "--seed", "minus-one"])), 1);
    assert_eq!(code(&cloudlapse(&["x.json", "--bogus"])), 1);
    assert_eq!(code(&cloudlapse(&["--help"])), 0);
    assert_eq!(code(&cloudlapse(&["--version"])), 0);
}

#[test]
fn bad_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    assert_eq!(code(&cloudlapse(&[dir.path().join("absent.json").to_str().unwrap(), "--out", out_dir])), 1);

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, r#"{ "scenario": { "kind": "teleport" } }"#).unwrap();
    assert_eq!(code(&cloudlapse(&[junk.to_str().unwrap(), "--out", out_dir])), 1);

    // σ = 0.1 is far above σ† and the file does not ask for relaxed mode
    let text = std::fs::read_to_string(scenario("bootstrap.json")).unwrap().replace(r#""mode": "relaxed","#, "");
    let strict = dir.path().join("strict.json");
    std::fs::write(&strict, text).unwrap();
    let out = cloudlapse(&[strict.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("σ†"), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&cloudlapse(&[strict.to_str().unwrap(), "--out", out_dir, "--relaxed"])), 0);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s = scenario("bootstrap.json");
    assert_eq!(code(&cloudlapse(&[s.to_str().unwrap(), "--out", a.path().to_str().unwrap(), "--threads", "1"])), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_cloudlapse"))
        .args([s.to_str().unwrap(), "--out", b.path().to_str().unwrap()])
        .env("CLOUDLAPSE_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    for f in ["boundary_data.csv", "trajectories/trajectory_0000.csv", "trajectories/trajectory_0063.csv", "bootstrap.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let (mut ma, mut mb) = (manifest(a.path()), manifest(b.path()));
    ma["config"]["output_dir"] = Value::Null;
    mb["config"]["output_dir"] = Value::Null;
    assert_eq!(ma, mb);
}
