use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use proptest::prelude::*;
use serde_json::Value;
use tempfile::TempDir;

const LISTING: &str = "\
  0x10: push rbp
  0x11: mov rbp, rsp
  0x14: call 0x7f00aa
  0x19: test eax, eax
  0x1b: jne 0x30
  0x1d: call 0x7f00bb
  0x22: pop rbp
  0x23: ret
";

const FOO: &str = "\
  0x40: call foo
  0x45: call bar
  0x4a: call baz
  0x4f: ret
";

fn cisguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cisguard"))
        .args(args)
        .env_remove("CISGUARD_SERVER")
        .env_remove("RS_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenario(dir: &Path, node_count: u32, rf: u32, tampered_copy: Option<&str>) -> PathBuf {
    write(dir, "wc.s", LISTING);
    let node_sources = match tampered_copy {
        Some(name) => format!(r#", "node_sources": {{"2": {{"path": "{name}"}}}}"#),
        None => String::new(),
    };
    let replicas: Vec<String> = (1..rf).map(|n| n.to_string()).collect();
    write(
        dir,
        "scenario.json",
        &format!(
            r#"{{"config": {{"node_count": {node_count}, "replication_factor": {rf}, "seed": 3}},
                "processes": [{{"process_id": "wc", "source": {{"path": "wc.s"}}{node_sources},
                                "primary": 0, "replicas": [{}], "exec_time_ms": 2000}}]}}"#,
            replicas.join(",")
        ),
    )
}

#[test]
fn profile_of_empty_listing() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "empty.s", "");
    let out = cisguard(&["--json", "profile", s(&f)]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(
        v["fingerprint"]["combined"],
        "1a03c02fb531d7e1ce353b2f20711c79af2b66730d6de865fb130734973ccd2c"
    );
    assert_eq!(v["stats"]["total_instructions"], 0);
}

#[test]
fn profile_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "a.s", LISTING);
    let a = cisguard(&["profile", s(&f)]);
    let b = cisguard(&["profile", s(&f)]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("(2 tokens)"));
}

#[test]
fn missing_and_malformed_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = cisguard(&["profile", s(&dir.path().join("nope.s"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));

    let bad = write(dir.path(), "bad.s", "0x10:\n");
    let out = cisguard(&["profile", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    assert_eq!(code(&cisguard(&["frobnicate"])), 2);
}

#[test]
fn diff_reports_class_deltas() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.s", LISTING);
    let b = write(dir.path(), "b.s", &format!("{LISTING}{FOO}"));
    let e1 = write(dir.path(), "e1.s", "");
    let e2 = write(dir.path(), "e2.s", "");

    let same = cisguard(&["diff", s(&a), s(&a)]);
    assert_eq!(code(&same), 0);
    assert!(stdout(&same).starts_with("safe"));

    let out = cisguard(&["--json", "diff", s(&a), s(&b)]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["verdict"], "unsafe");
    assert_eq!(v["calls"]["delta"], 3);
    assert_eq!(v["returns"]["delta"], 1);
    assert_eq!(v["jumps"]["delta"], 0);

    assert!(stdout(&cisguard(&["diff", s(&e1), s(&e2)])).starts_with("safe"));
}

#[test]
fn stats_over_a_directory_is_sorted_and_pooled() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "b.s", LISTING);
    write(dir.path(), "a.s", "0x1: ret\n");
    let out = cisguard(&["--json", "stats", s(dir.path())]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["files"][0]["name"], "a.s");
    assert_eq!(v["files"][1]["name"], "b.s");
    assert_eq!(v["pooled"]["total_instructions"], 9);
    assert_eq!(v["pooled"]["return_count"], 2);
}

#[test]
fn run_exit_codes_follow_the_outcome() {
    let dir = TempDir::new().unwrap();
    let clean = scenario(dir.path(), 3, 3, None);
    let out = cisguard(&["run", s(&clean)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("no_attack"));

    write(dir.path(), "wc_tampered.s", &format!("{LISTING}{FOO}"));
    let tampered = scenario(dir.path(), 3, 3, Some("wc_tampered.s"));
    let report = dir.path().join("report.jsonl");
    let out = cisguard(&["--out", s(&report), "run", s(&tampered)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("ATTACK"));
    let lines = std::fs::read_to_string(&report).unwrap();
    for line in lines.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }
    assert!(lines.contains("\"attack\""));

    let oversized = scenario(dir.path(), 2, 3, None);
    assert_eq!(code(&cisguard(&["run", s(&oversized)])), 2);
}

#[test]
fn run_output_is_reproducible_and_reads_rs_seed() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(dir.path(), 4, 3, None);
    let a = cisguard(&["--json", "run", "--trace", s(&sc)]);
    let b = cisguard(&["--json", "run", "--trace", s(&sc)]);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert!(!v["trace"].as_array().unwrap().is_empty());

    let env = Command::new(env!("CARGO_BIN_EXE_cisguard"))
        .args(["--json", "run", "--trace", s(&sc)])
        .env("RS_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&env), 0);
    let bad = Command::new(env!("CARGO_BIN_EXE_cisguard"))
        .args(["run", s(&sc)])
        .env("RS_SEED", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn inject_appends_a_patch_that_run_then_detects() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(dir.path(), 3, 3, None);
    let patch = write(dir.path(), "patch.json", r#"{"insertions": [[0, "call 0x1"]]}"#);
    let out = cisguard(&["inject", s(&sc), "--node", "1", "--process", "wc", "--patch-file", s(&patch)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["patches"][0]["node"], 1);
    assert_eq!(v["processes"][0]["source"]["path"], "wc.s");

    let patched = write(dir.path(), "patched.json", &stdout(&out));
    assert_eq!(code(&cisguard(&["run", s(&patched)])), 1);

    let out = cisguard(&["inject", s(&sc), "--node", "7", "--process", "wc", "--patch-file", s(&patch)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn talks_to_an_external_server() {
    let mut server = Command::new(env!("CARGO_BIN_EXE_cisguard"))
        .args(["serve", "--addr", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").unwrap().to_string();

    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "a.s", LISTING);
    let out = Command::new(env!("CARGO_BIN_EXE_cisguard"))
        .args(["--json", "profile", s(&f)])
        .env("CISGUARD_SERVER", &url)
        .output()
        .unwrap();
    server.kill().unwrap();
    server.wait().unwrap();
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["stats"]["cfi_count"], 4);

    let out = Command::new(env!("CARGO_BIN_EXE_cisguard"))
        .args(["profile", s(&f)])
        .env("CISGUARD_SERVER", "http://127.0.0.1:1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn diff_never_fails_on_valid_listings(extra in proptest::collection::vec(
        prop_oneof![Just("call 0x1"), Just("ret"), Just("jmp 0x2"), Just("nop"), Just("add eax, 1")],
        0..6,
    )) {
        let dir = TempDir::new().unwrap();
        let a = write(dir.path(), "a.s", LISTING);
        let body: String = extra.iter().enumerate().map(|(i, m)| format!("0x{:x}: {m}\n", 0x100 + i)).collect();
        let b = write(dir.path(), "b.s", &format!("{LISTING}{body}"));
        let out = cisguard(&["--json", "diff", s(&a), s(&b)]);
        prop_assert_eq!(code(&out), 0);
        let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
        let changed = extra.iter().any(|m| !m.starts_with("nop") && !m.starts_with("add"));
        prop_assert_eq!(v["verdict"] == "unsafe", changed);
    }
}
