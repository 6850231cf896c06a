//! Exit-code and output contract of the command-line binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noteswap"))
}

fn write_temp(name: &str, content: &str) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(format!("noteswap-cli-test-{name}"));
    std::fs::write(&path, content).unwrap();
    path
}

#[test]
fn run_passes_on_a_good_script() {
    let path = write_temp(
        "good.txt",
        "party alice\nmint alice green 5\npay alice alice green 2\nassert_balance alice green 5\n",
    );
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));
}

#[test]
fn expectation_failure_exits_1() {
    let path = write_temp(
        "expect.txt",
        "party alice\nmint alice green 5 expect reject reserved-color\n",
    );
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_error_exits_3() {
    let path = write_temp("parse.txt", "warp alice home\n");
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn missing_file_exits_3() {
    let out = bin().arg("run").arg("/nonexistent/file.txt").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verbose_prints_the_trace_and_dump_writes_the_ledger() {
    let path = write_temp(
        "trace.txt",
        "seed 3\nparty alice\nmint alice green 5\n",
    );
    let dump = std::env::temp_dir().join("noteswap-cli-test-dump.txt");
    let out = bin()
        .arg("run")
        .arg(&path)
        .arg("--verbose")
        .arg("--dump-ledger")
        .arg(&dump)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("init depth=16 seed=3"));
    assert!(stdout.contains("mint party=alice color=3 value=5 accept pos=0"));
    let dumped = std::fs::read_to_string(&dump).unwrap();
    assert!(dumped.starts_with("commitment 0 "));
}

#[test]
fn fuzz_reports_and_exits_0_when_fair() {
    let out = bin()
        .args(["fuzz", "--count", "5", "--seed", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("both-accepted         0"));
    assert!(stdout.contains("PASS fuzz count=5 seed=2"));
}

#[test]
fn depth_flag_overrides_the_script_header() {
    let path = write_temp("depth.txt", "depth 16\nparty alice\nmint alice green 1\n");
    let out = bin()
        .arg("run")
        .arg(&path)
        .arg("--depth")
        .arg("6")
        .arg("--verbose")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("init depth=6"));
}
