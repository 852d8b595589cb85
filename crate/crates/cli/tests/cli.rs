use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const HEADER: &str = "sweep_param,sweep_value,planner,trials,seed,mean_t_sd,stderr_t_sd,mean_t_pd,stderr_t_pd,analytic_corollary1,analytic_asymptotic,best_bound,worst_bound";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coded-cache"));
    c.env_remove("CODED_CACHE_SEED");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
  "params": {"users": 4, "files": 4, "servers": 3, "rho": 2, "user_cache": "1"},
  "planner": "successive_z0",
  "trials": 40,
  "seed": 11,
  "sweep": {"param": "M_U", "values": ["0", "1", "2", "3", "4"]}
}"#;

#[test]
fn analyze_prints_the_closed_forms() {
    let out = run(bin().args([
        "analyze", "--K", "4", "--N", "5", "--P", "3", "--rho", "2", "--t", "1", "--json",
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.to_string().contains("corollary1"), "{v}");
}

#[test]
fn analyze_with_a_topology_file() {
    let dir = TempDir::new().unwrap();
    let topo = write_config(
        dir.path(),
        "t.json",
        r#"{"server_sets": [[0, 1], [0, 2], [1, 2], [0, 1]]}"#,
    );
    let out = run(bin()
        .args([
            "analyze",
            "--K",
            "4",
            "--P",
            "3",
            "--rho",
            "2",
            "--t",
            "1",
            "--json",
            "--topology",
        ])
        .arg(&topo));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        code(&run(
            bin().args(["analyze", "--K", "4", "--P", "3", "--rho", "2"])
        )),
        2
    );
    assert_eq!(code(&run(bin().arg("nonsense"))), 2);
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &SMALL.replace("\"trials\": 40", "\"trials\": 0"),
    );
    assert_eq!(code(&run(bin().arg("simulate").arg(&cfg))), 2);
    let cfg = write_config(
        dir.path(),
        "u.json",
        &SMALL.replace("\"seed\": 11", "\"seed\": 11, \"colour\": 1"),
    );
    assert_eq!(code(&run(bin().arg("simulate").arg(&cfg))), 2);
    assert_eq!(
        code(&run(bin().args(["simulate", "/nonexistent/config.json"]))),
        2
    );
}

#[test]
fn infeasible_parameters_exit_3_and_leave_no_output() {
    assert_eq!(
        code(&run(bin().args([
            "analyze", "--K", "4", "--P", "3", "--rho", "0", "--t", "1"
        ]))),
        3
    );
    let dir = TempDir::new().unwrap();
    let body = SMALL.replace(
        "\"user_cache\": \"1\"",
        "\"user_cache\": \"1\", \"server_storage\": \"1/4\"",
    );
    let cfg = write_config(dir.path(), "c.json", &body);
    let target = dir.path().join("out.csv");
    let out = run(bin().arg("simulate").arg(&cfg).arg("--output").arg(&target));
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!target.exists());
    assert!(!target.with_extension("partial").exists());
}

#[test]
fn simulate_writes_a_stable_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(
        code(&run(bin()
            .arg("simulate")
            .arg(&cfg)
            .arg("--output")
            .arg(&a))),
        0
    );
    assert_eq!(
        code(&run(bin()
            .arg("simulate")
            .arg(&cfg)
            .arg("--output")
            .arg(&b))),
        0
    );
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 6);
    assert!(!text.contains('\r'));
    // at M_U = N everything is cached
    assert!(
        lines[5].starts_with("M_U,4.0,successive_z0,40,11,0.0,"),
        "{}",
        lines[5]
    );
}

#[test]
fn seed_precedence_is_flag_then_env_then_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let seed_of = |out: &Output| {
        stdout(out)
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(4)
            .unwrap()
            .to_string()
    };
    let from_config = run(bin().arg("simulate").arg(&cfg).args(["--output", "-"]));
    assert_eq!(seed_of(&from_config), "11");
    let from_env = run(bin()
        .arg("simulate")
        .arg(&cfg)
        .args(["--output", "-"])
        .env("CODED_CACHE_SEED", "22"));
    assert_eq!(seed_of(&from_env), "22");
    let from_flag = run(bin()
        .arg("simulate")
        .arg(&cfg)
        .args(["--output", "-", "--seed", "33"])
        .env("CODED_CACHE_SEED", "22"));
    assert_eq!(seed_of(&from_flag), "33");
    let bad_env = run(bin()
        .arg("simulate")
        .arg(&cfg)
        .env("CODED_CACHE_SEED", "minus one"));
    assert_eq!(code(&bad_env), 2);
}

#[test]
fn sweep_overrides_the_axis() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = run(bin().arg("sweep").arg(&cfg).args([
        "--output", "-", "--param", "M_U", "--values", "1,2", "--trials", "5",
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("M_U,1.0,successive_z0,5,"));
}

#[test]
fn verify_passes_including_t_equal_k() {
    let out = run(bin().args(["verify", "--P", "3", "--K", "3,4", "--seeds", "3"]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["failures"], 0);
    let out = run(bin().args(["verify", "--P", "3", "--K", "3", "--t", "K", "--seeds", "2"]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupted_message_makes_verify_exit_1_naming_the_user() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let out = run(bin()
        .args([
            "verify",
            "--P",
            "3",
            "--K",
            "3",
            "--rho",
            "2",
            "--z",
            "0",
            "--t",
            "1",
            "--seeds",
            "1",
            "--corrupt-one-message",
            "--report",
        ])
        .arg(&report));
    assert_eq!(code(&out), 1);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["corrupted"], true);
    let failed = v["failed"].as_array().unwrap();
    assert!(!failed.is_empty());
    for f in failed {
        assert!(!f["failed_users"].as_array().unwrap().is_empty(), "{f}");
    }
}
