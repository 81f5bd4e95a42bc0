use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const TWO_CYCLE: &str = r#"{"dimension": 2, "vertices": [[1, 0], [0, 1]], "edges": [[0, 1], [1, 0]]}"#;
const ONE_WAY: &str = r#"{"dimension": 2, "vertices": [[1, 0], [0, 1]], "edges": [[0, 1]]}"#;
const SPARSE: &str = r#"{"dimension": 2, "vertices": [[0, 3], [1, 2], [2, 1], [3, 0]],
    "edges": [[0, 1], [1, 2], [2, 3], [3, 2]]}"#;
const COMPLETE: &str = r#"{"dimension": 2, "vertices": [[0, 3], [1, 2], [2, 1], [3, 0]],
    "edges": [[0, 1], [0, 2], [0, 3], [1, 0], [1, 2], [1, 3],
              [2, 0], [2, 1], [2, 3], [3, 0], [3, 1], [3, 2]]}"#;
const TRIANGLE_POINTS: &str = r#"{"dimension": 2, "vertices": [[0, 0], [1, 0], [0, 1]],
    "edges": [[0, 1], [1, 2]]}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, content: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, content).unwrap();
        path
    }
}

fn toric(args: &[&Path], flags: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toric"))
        .args(flags.iter().take(1))
        .args(args)
        .args(flags.iter().skip(1))
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn check_cb_member() {
    let ws = Workspace::new();
    let net = ws.file("g.json", TWO_CYCLE);
    let rates = ws.file("k.json", "[2, 3]");
    let out = toric(&[&net, &rates], &["check-cb"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["member"], true);
    let x = doc["witness_state"].as_array().unwrap();
    let ratio = x[0].as_f64().unwrap() / x[1].as_f64().unwrap();
    assert!((ratio - 1.5).abs() < 1e-10);
}

#[test]
fn check_cb_at_state() {
    let ws = Workspace::new();
    let net = ws.file("g.json", TWO_CYCLE);
    let rates = ws.file("k.json", "[2, 3]");
    let good = ws.file("x.json", "[3, 2]");
    let bad = ws.file("y.json", "[1, 1]");
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .arg("check-cb")
        .args([&net, &rates])
        .arg("--state")
        .arg(&good)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .arg("check-cb")
        .args([&net, &rates])
        .arg("--state")
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn check_cb_non_weakly_reversible() {
    let ws = Workspace::new();
    let net = ws.file("g.json", ONE_WAY);
    let rates = ws.file("k.json", "[1]");
    let out = toric(&[&net, &rates], &["check-cb"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["reason"], "not weakly reversible");
}

#[test]
fn malformed_input_is_an_error() {
    let ws = Workspace::new();
    let net = ws.file("g.json", "{\"dimension\": 2, ");
    let rates = ws.file("k.json", "[1]");
    let out = toric(&[&net, &rates], &["check-cb"]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
    let net = ws.file("h.json", TWO_CYCLE);
    let short = ws.file("short.json", "[1]");
    assert_eq!(code(&toric(&[&net, &short], &["check-cb"])), 2);
}

#[test]
fn equiv_examples() {
    let ws = Workspace::new();
    let net = ws.file("g.json", TWO_CYCLE);
    let rates = ws.file("k.json", "[2, 3]");
    let out = toric(&[&net, &rates, &net, &rates], &["equiv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["residual"], 0.0);

    let other = ws.file("k2.json", "[3, 3]");
    assert_eq!(code(&toric(&[&net, &rates, &net, &other], &["equiv"])), 1);

    // A toric system on the complete collinear graph and its image on the sparse graph.
    let complete = ws.file("c.json", COMPLETE);
    let sparse = ws.file("s.json", SPARSE);
    let kt = [1.0, 0.5, 0.25, 2.0, 1.5, 0.5, 0.3, 0.7, 1.1, 0.2, 0.4, 0.9];
    let k = [
        kt[0] + 2.0 * kt[1] + 3.0 * kt[2],
        kt[4] - kt[3] + 2.0 * kt[5],
        kt[8] - kt[7] - 2.0 * kt[6],
        kt[11] + 2.0 * kt[10] + 3.0 * kt[9],
    ];
    let kt_file = ws.file("kt.json", &serde_json::to_string(&kt).unwrap());
    let k_file = ws.file("ks.json", &serde_json::to_string(&k).unwrap());
    assert_eq!(code(&toric(&[&complete, &kt_file, &sparse, &k_file], &["equiv"])), 0);
}

#[test]
fn realize_signed_and_positive() {
    let ws = Workspace::new();
    let complete = ws.file("c.json", COMPLETE);
    let sparse = ws.file("s.json", SPARSE);
    // k21 large makes the sparse realization need a negative k23.
    let kt = [1.0, 1.0, 1.0, 5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let kt = ws.file("kt.json", &serde_json::to_string(&kt).unwrap());
    let out = toric(&[&complete, &kt, &sparse], &["realize", "--signed"]);
    assert_eq!(code(&out), 0);
    let rates = stdout_json(&out)["rates"].clone();
    assert!((rates[1].as_f64().unwrap() - (1.0 - 5.0 + 2.0)).abs() < 1e-9);
    assert_eq!(code(&toric(&[&complete, &kt, &sparse], &["realize"])), 1);
}

#[test]
fn flux_membership() {
    let ws = Workspace::new();
    let net = ws.file("g.json", TWO_CYCLE);
    let good = ws.file("j.json", "[2, 2]");
    let bad = ws.file("j2.json", "[1, 2]");
    let out = toric(&[&net, &good], &["flux"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["complex_balanced"], true);
    assert_eq!(code(&toric(&[&net, &bad], &["flux"])), 1);
}

#[test]
fn disguised_positive_and_signed() {
    let ws = Workspace::new();
    let sparse = ws.file("s.json", SPARSE);
    let complete = ws.file("c.json", COMPLETE);
    let positive = ws.file("k.json", "[0.4, 3.0, 1.2, 7.5]");
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .arg("disguised")
        .args([&sparse, &positive])
        .arg("--target")
        .arg(&complete)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["member"], true);

    // k12 k43 + k34 k23 = 1 - 2 = -1
    let outside = ws.file("ko.json", "[1.0, -1.0, 2.0, 1.0]");
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .arg("disguised")
        .args([&sparse, &outside])
        .args(["--signed", "--starts", "8", "--target"])
        .arg(&complete)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["search_exhausted"], true);

    let missing = ws.dir.path().join("missing.json");
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .arg("disguised")
        .args([&sparse, &positive])
        .arg("--target")
        .arg(&missing)
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn path_examples() {
    let ws = Workspace::new();
    let sparse = ws.file("s.json", SPARSE);
    let complete = ws.file("c.json", COMPLETE);
    let a = ws.file("a.json", "[0.4, 3.0, 1.2, 7.5]");
    let b = ws.file("b.json", "[2.0, 0.3, 5.0, 1.0]");
    let run = |x: &Path, y: &Path, extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_toric"))
            .arg("path")
            .args([&sparse, x, y])
            .args(["--samples", "8", "--target"])
            .arg(&complete)
            .args(extra)
            .output()
            .unwrap()
    };
    let out = run(&a, &b, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    let segments = doc["segments"].as_array().unwrap();
    assert_eq!(segments.len(), 3);
    for seg in segments {
        for sample in seg["samples"].as_array().unwrap() {
            assert_eq!(sample["certificate"]["member"], true);
        }
    }

    let same = run(&a, &a, &[]);
    assert_eq!(code(&same), 0);
    let doc = stdout_json(&same);
    for seg in doc["segments"].as_array().unwrap() {
        let samples = seg["samples"].as_array().unwrap();
        assert!(samples.iter().all(|s| s["rates"] == samples[0]["rates"]));
    }

    let outside = ws.file("o.json", "[1.0, -1.0, 2.0, 1.0]");
    let out = run(&a, &outside, &["--signed", "--starts", "4"]);
    assert_eq!(code(&out), 1);
    assert!(stdout_json(&out)["error"].as_str().unwrap().contains("endpoint b"));
}

#[test]
fn enum_wr_counts() {
    let ws = Workspace::new();
    let pair = ws.file("p.json", ONE_WAY);
    let out = toric(&[&pair], &["enum-wr", "--complete"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["count"], 1);

    // Brute force over the 2^6 - 1 edge subsets of the complete graph on 3 vertices.
    let tri = ws.file("t.json", TRIANGLE_POINTS);
    let out = toric(&[&tri], &["enum-wr", "--complete"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    let edges: Vec<(usize, usize)> = doc["network"]["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e[0].as_u64().unwrap() as usize, e[1].as_u64().unwrap() as usize))
        .collect();
    assert_eq!(doc["count"], brute_force_wr_count(3, &edges));

    let out = toric(&[&tri], &["enum-wr"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["count"], 0);

    let out = toric(&[&tri], &["enum-wr", "--complete", "--max", "2"]);
    assert_eq!(stdout_json(&out)["count"], 2);
}

// Nonempty subsets in which every edge lies on a directed cycle.
fn brute_force_wr_count(n: usize, edges: &[(usize, usize)]) -> usize {
    let m = edges.len();
    (1u32..(1 << m))
        .filter(|mask| {
            let chosen: Vec<(usize, usize)> =
                (0..m).filter(|e| mask >> e & 1 == 1).map(|e| edges[e]).collect();
            let mut reach = vec![vec![false; n]; n];
            for &(s, t) in &chosen {
                reach[s][t] = true;
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if reach[i][k] && reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
            chosen.iter().all(|&(s, t)| reach[t][s])
        })
        .count()
}

#[test]
fn table_format_and_config_file() {
    let ws = Workspace::new();
    let net = ws.file("g.json", TWO_CYCLE);
    let rates = ws.file("k.json", "[2, 3]");
    let cfg = ws.file("cfg.json", r#"{"format": "table"}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .args(["check-cb", "--config"])
        .arg(&cfg)
        .args([&net, &rates])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("member"));
    // The flag overrides the file.
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .args(["check-cb", "--format", "json", "--config"])
        .arg(&cfg)
        .args([&net, &rates])
        .output()
        .unwrap();
    assert_eq!(stdout_json(&out)["member"], true);

    let bad = ws.file("bad.json", r#"{"tolerances": {"tol": -1}}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_toric"))
        .args(["check-cb", "--config"])
        .arg(&bad)
        .args([&net, &rates])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn output_is_reproducible() {
    let ws = Workspace::new();
    let sparse = ws.file("s.json", SPARSE);
    let rates = ws.file("k.json", "[0.4, 3.0, 1.2, 7.5]");
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_toric"))
            .args(["disguised", "--starts", "4"])
            .args([&sparse, &rates])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}
