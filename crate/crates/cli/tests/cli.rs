use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};
use storystream::encoder::hashed_encode;

fn storystream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storystream"))
        .args(args)
        .env("RUST_LOG", "error")
        .env_remove("STORYSTREAM_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = storystream(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn corpus(dir: &Path, extra: &[&str]) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let mut args = vec!["gen-synthetic", "-o", s(&path)];
    args.extend_from_slice(extra);
    ok(&args);
    path
}

#[test]
fn empty_input_gives_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.jsonl");
    std::fs::write(&input, "").unwrap();
    let out = dir.path().join("out");
    ok(&["run", "-i", s(&input), "-o", s(&out)]);
    assert_eq!(std::fs::read_to_string(out.join("stories.jsonl")).unwrap(), "");
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(out.join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["slides"], 0);
    assert_eq!(meta["truncated"], false);
}

#[test]
fn three_story_corpus_yields_three_stories() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), &["--stories", "3", "--panes", "3"]);
    let out = dir.path().join("out");
    ok(&["run", "-i", s(&input), "-o", s(&out), "--min-story-size", "6"]);
    let reports = lines(&out.join("stories.jsonl"));
    assert_eq!(reports.len(), 3);
    let new: usize = reports.iter().map(|r| r["new_stories"].as_array().unwrap().len()).sum();
    assert!(new >= 3, "{new} new stories");
    for key in ["pane", "arrivals", "assignments", "new_stories", "expired_stories", "discarded", "live_story_sizes"] {
        assert!(reports[0].get(key).is_some(), "missing {key}");
    }
    let timings = std::fs::read_to_string(out.join("slide_timings.csv")).unwrap();
    assert_eq!(timings.lines().count(), 4);
    assert!(out.join("expired.jsonl").exists());
}

#[test]
fn dead_bridge_names_endpoint_and_healthz() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), &["--panes", "1"]);
    let out = storystream(&[
        "run", "-i", s(&input), "-o", s(&dir.path().join("out")),
        "--encoder", "bridge", "--endpoint", "http://127.0.0.1:9",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let last = err.lines().last().unwrap();
    assert!(last.contains("http://127.0.0.1:9") && last.contains("/healthz"), "{err}");
}

/// Serves /healthz and the first `good` /embed calls; later calls get a 500.
fn flaky_bridge(dim: usize, good: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let served = Arc::new(AtomicUsize::new(0));
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut first = String::new();
            reader.read_line(&mut first).unwrap();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let (status, reply) = if first.starts_with("GET /healthz") {
                ("200 OK", json!({"dim": dim, "model": "flaky"}))
            } else if served.fetch_add(1, Ordering::SeqCst) < good {
                let req: Value = serde_json::from_slice(&body).unwrap();
                let vectors: Vec<Vec<f64>> = req["sentences"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|x| hashed_encode(x.as_str().unwrap(), dim, 42).unwrap().into_inner())
                    .collect();
                ("200 OK", json!({"dim": dim, "vectors": vectors}))
            } else {
                ("500 Internal Server Error", json!({"error": "model crashed"}))
            };
            let reply = reply.to_string();
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    endpoint
}

#[test]
fn failure_mid_stream_leaves_truncation_marker() {
    let dir = tempfile::tempdir().unwrap();
    // Small slides: each needs exactly one /embed request.
    let input = corpus(dir.path(), &["--panes", "3", "--stories", "1", "--articles-per-story-per-pane", "3"]);
    let endpoint = flaky_bridge(256, 1);
    let out_dir = dir.path().join("out");
    let out = storystream(&[
        "run", "-i", s(&input), "-o", s(&out_dir), "--min-story-size", "3",
        "--encoder", "bridge", "--endpoint", &endpoint,
    ]);
    assert!(!out.status.success());
    let reports = lines(&out_dir.join("stories.jsonl"));
    assert_eq!(reports.len(), 2, "one slide plus the marker");
    assert_eq!(reports[1]["truncated"], true);
    assert!(reports[1]["error"].as_str().unwrap().contains("/embed"));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["truncated"], true);

    // eval stops at the marker and scores what was written.
    let printed = ok(&["eval", "--stories", s(&out_dir.join("stories.jsonl")), "-i", s(&input)]);
    assert!(printed.contains("windows 1"), "{printed}");
}

#[test]
fn eval_perfect_run_and_policies() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), &["--noise-ratio", "0", "--panes", "4"]);
    let out = dir.path().join("out");
    ok(&["run", "-i", s(&input), "-o", s(&out), "--min-story-size", "6"]);
    let stories = out.join("stories.jsonl");
    let printed = ok(&["eval", "--stories", s(&stories), "-i", s(&input)]);
    assert!(printed.contains("B3-F1 1.000  AMI 1.000  ARI 1.000"), "{printed}");
    let singletons = std::fs::read_to_string(out.join("eval.csv")).unwrap();

    let excl = dir.path().join("excl.csv");
    ok(&["eval", "--stories", s(&stories), "-i", s(&input), "--policy", "exclude-unassigned", "--out", s(&excl)]);
    assert_eq!(std::fs::read_to_string(excl).unwrap(), singletons);
}

#[test]
fn eval_hand_computed_window() {
    // Predicted {a,b},{c}; gold {a},{b,c}: B³ precision = recall = F1 = 2/3.
    let dir = tempfile::tempdir().unwrap();
    let stories = dir.path().join("stories.jsonl");
    let report = json!({
        "pane": 0, "arrivals": ["a", "b", "c"], "assignments": [],
        "new_stories": [{"story_id": 0, "members": ["a", "b"], "top_keywords": []}],
        "expired_stories": [], "discarded": [], "live_story_sizes": {"0": 2}
    });
    std::fs::write(&stories, format!("{report}\n")).unwrap();
    let input = dir.path().join("input.jsonl");
    std::fs::write(
        &input,
        "{\"id\":\"a\",\"time\":0,\"text\":\"x\",\"label\":\"x\"}\n\
         {\"id\":\"b\",\"time\":0,\"text\":\"y\",\"label\":\"y\"}\n\
         {\"id\":\"c\",\"time\":0,\"text\":\"y\",\"label\":\"y\"}\n",
    )
    .unwrap();
    ok(&["eval", "--stories", s(&stories), "-i", s(&input)]);
    let csv = std::fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..7], ["0", "3", "2", "2", "0.666667", "0.666667", "0.666667"]);
    // ARI of this pair: index 0, E = 1·1/3, max = 1 → −0.5.
    assert_eq!(row[8], "-0.500000");
}

#[test]
fn eval_lists_missing_labels() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.jsonl");
    std::fs::write(
        &input,
        "{\"id\":\"a\",\"time\":0,\"text\":\"Flood warning.\",\"label\":\"x\"}\n\
         {\"id\":\"b\",\"time\":0,\"text\":\"Flood warning.\"}\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["run", "-i", s(&input), "-o", s(&out)]);
    let res = storystream(&["eval", "--stories", s(&out.join("stories.jsonl")), "-i", s(&input)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains(": b"));
}

#[test]
fn gen_synthetic_contract() {
    let dir = tempfile::tempdir().unwrap();
    let one = ok(&["gen-synthetic", "--stories", "1", "--articles-per-story-per-pane", "1", "--panes", "1"]);
    let records: Vec<Value> = one.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["label"], "story-0");

    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&["gen-synthetic", "--seed", "3", "-o", s(&a)]);
    ok(&["gen-synthetic", "--seed", "3", "-o", s(&b)]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn config_file_flags_and_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), &["--panes", "2"]);
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[window]\nmin_story_size = 6\nkeywords_n = 5\nrng_seed = 1\n").unwrap();
    let out = dir.path().join("out");
    let res = Command::new(env!("CARGO_BIN_EXE_storystream"))
        .args(["run", "-i", s(&input), "-o", s(&out), "--config", s(&config), "--temperature", "3"])
        .env("STORYSTREAM_SEED", "99")
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(out.join("run_meta.json")).unwrap()).unwrap();
    let window = &meta["config"]["window"];
    assert_eq!(window["min_story_size"], 6);
    assert_eq!(window["keywords_n"], 5);
    assert_eq!(window["temperature"], 3.0);
    assert_eq!(window["rng_seed"], 99);
    assert_eq!(meta["seed"], 99);
}

#[test]
fn bad_inputs_fail_with_one_line_cause() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.jsonl");
    std::fs::write(&input, "{\"id\":\"a\",\"time\":0,\"text\":\"ok\"}\n{\"id\":\"b\",\"time\":0}\n").unwrap();
    let res = storystream(&["run", "-i", s(&input), "-o", s(&dir.path().join("out"))]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("line 2"), "{err}");

    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[window]\nwindow_slides = 0\n").unwrap();
    let res = storystream(&["run", "-i", s(&input), "-o", s(&dir.path().join("out")), "--config", s(&config)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("window_slides"));
}

#[test]
fn bench_reports_rows() {
    let printed = ok(&["bench", "--sizes", "100,200", "--stories", "2", "--measure-slides", "2", "--json"]);
    let rows: Vec<Value> = serde_json::from_str(&printed).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["ratio_to_previous"].is_null());
    assert!(rows[1]["ratio_to_previous"].as_f64().unwrap() > 0.0);
    assert!(rows[1]["max_panes_per_story"].as_u64().unwrap() <= 7);
}
