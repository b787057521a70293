use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wifi_sr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wifi-sr"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "seed = 5\n\n[scenario]\nn_deployments = 3\nsim_time_s = 4.0\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn describe_actions_lists_capped_powers() {
    let out = wifi_sr(&["describe-actions", "--mode", "11axsr"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let powers: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(2).unwrap())
        .collect();
    assert_eq!(powers, ["20", "17", "13", "9", "5", "1"]);

    let out = wifi_sr(&["describe-actions", "--mode", "free"]);
    assert_eq!(stdout(&out).lines().count(), 25);
}

#[test]
fn config_problems_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = dir.path().join("bad_key.toml");
    fs::write(&bad_key, "[radio]\ncca = -70.0\n").unwrap();
    let out = wifi_sr(&["validate", "--config", bad_key.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cca"));

    let bad_values = dir.path().join("bad_values.toml");
    fs::write(
        &bad_values,
        "[radio]\ncca_dbm = -80.0\n\n[agent]\nepoch_s = 0.3\n",
    )
    .unwrap();
    let out = wifi_sr(&["validate", "--config", bad_values.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(
        err.contains("radio.cca_dbm") && err.contains("agent.epoch_s"),
        "{err}"
    );

    let out = wifi_sr(&["validate", "--config", small_config(dir.path()).as_str()]);
    assert!(out.status.success());
}

#[test]
fn run_writes_requested_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out_dir = dir.path().join("run");
    let out = wifi_sr(&[
        "run",
        "--config",
        &config,
        "--mode",
        "free",
        "--reward",
        "coord",
        "--out",
        out_dir.to_str().unwrap(),
        "--trace-events",
        "--trace-attempts",
        "--agent-log",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let kpis = fs::read_to_string(out_dir.join("kpis.csv")).unwrap();
    assert_eq!(kpis.lines().count(), 5);
    let log = fs::read_to_string(out_dir.join("agent_log.csv")).unwrap();
    assert_eq!(
        log.lines().next().unwrap(),
        "epoch,bss,arm_index,cca_dbm,txpower_dbm,reward,epsilon"
    );
    assert_eq!(log.lines().count(), 1 + 4 * 4);
    assert!(fs::read_to_string(out_dir.join("events.tsv"))
        .unwrap()
        .contains("epoch-boundary"));
    assert!(out_dir.join("attempts.csv").exists());
}

#[test]
fn report_reproduces_experiment_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out_dir = dir.path().join("exp");
    let out_dir = out_dir.to_str().unwrap();
    let out = wifi_sr(&[
        "experiment",
        "--config",
        &config,
        "--out",
        out_dir,
        "--parallel",
        "2",
        "--spider",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let results = fs::read_to_string(Path::new(out_dir).join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 5 * 3);
    let spider = fs::read_to_string(Path::new(out_dir).join("spider.csv")).unwrap();

    let out = wifi_sr(&["report", "--out", out_dir, "--spider"]);
    assert!(out.status.success());
    assert_eq!(
        fs::read_to_string(Path::new(out_dir).join("results.csv")).unwrap(),
        results
    );
    assert_eq!(
        fs::read_to_string(Path::new(out_dir).join("spider.csv")).unwrap(),
        spider
    );
}

#[test]
fn runtime_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = wifi_sr(&[
        "report",
        "--out",
        dir.path().join("missing").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
