use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str], out: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grw-lab")).args(args).arg("--out").arg(out).output().unwrap()
}

fn config(name: &str) -> String {
    root().join("configs").join(name).display().to_string()
}

#[test]
fn verify_marginal_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--config", &config("marginal.json")], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 4, "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn zero_rate_trajectories_have_no_flashes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--config", &config("lambda_zero.json")], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("trajectories.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["events"].as_array().unwrap().len(), 0);
    }
}

#[test]
fn lindblad_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["lindblad", "--config", &config("lambda_zero.json"), "--format", "csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("lindblad.csv")).unwrap();
    assert!(csv.starts_with("t,trace,purity"));
}

#[test]
fn replay_is_identical_across_thread_counts() {
    let records = root().join("data/trajectories.jsonl");
    let shipped = std::fs::read_to_string(&records).unwrap();
    for jobs in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&["replay", records.to_str().unwrap(), "--config", &config("simulate.json"), "--jobs", jobs], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(std::fs::read_to_string(dir.path().join("replayed.jsonl")).unwrap(), shipped);
    }
}

#[test]
fn simulate_reproduces_shipped_records() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--config", &config("simulate.json"), "--jobs", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let shipped = std::fs::read_to_string(root().join("data/trajectories.jsonl")).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("trajectories.jsonl")).unwrap(), shipped);
}

#[test]
fn invalid_field_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(root().join("configs/simulate.json")).unwrap().replace("\"sigma\": 1.0", "\"sigma\": -1.0");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let o = run(&["simulate", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/model/sigma"));
}

#[test]
fn missing_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate"], dir.path()).status.code(), Some(2));
    let o = run(&["simulate", "--config", "/nonexistent/run.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn povm_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["povm", "--config", &config("standard_povm.json")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let path = dir.path().join("povm.json");
    let p = grw_lab::io::read_povm(&path).unwrap();
    let again = dir.path().join("again.json");
    grw_lab::io::write_povm(&p, &again).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), std::fs::read_to_string(&again).unwrap());
}
