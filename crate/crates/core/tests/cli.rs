use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use weblog_miner::analysis::{read_report, Results};
use weblog_miner::behavior::GroundTruth;
use weblog_miner::config::CONFIG_ENV;

const BIN: &str = env!("CARGO_BIN_EXE_weblog-miner");

const CLF: &str = r#"127.0.0.1 - frank [10/Oct/2000:13:55:36 -0700] "GET /apache_pb.gif HTTP/1.0" 200 2326"#;

fn cmd() -> Command {
    let mut c = Command::new(BIN);
    c.env_remove(CONFIG_ENV);
    c
}

fn run(args: &[&str]) -> Output {
    cmd().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = cmd()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // the process may exit before reading, e.g. on a configuration error
    let _ = child.stdin.take().unwrap().write_all(input);
    child.wait_with_output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_usage() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_flag_is_usage_error() {
    assert_eq!(run(&["mine", "seq", "--min-support", "lots"]).status.code(), Some(1));
    assert_eq!(run(&["parse", "--format", "nginx"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(ok(&out).contains("sessionize"));
}

#[test]
fn parse_reads_stdin_and_reports() {
    let input = format!("{CLF}\nnot a log line\n{CLF}\n");
    let out = run_stdin(&["parse", "--format", "clf"], input.as_bytes());
    let stdout = ok(&out);
    assert_eq!(stdout.lines().count(), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("parsed 2 of 3 lines (1 malformed)"), "{stderr}");
    assert!(stderr.contains("line 2:"), "{stderr}");
}

#[test]
fn wrong_format_trips_malformed_guard() {
    let out = run_stdin(&["parse", "--format", "combined"], format!("{CLF}\n").as_bytes());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
    let out = run_stdin(
        &["parse", "--format", "combined", "--max-malformed-fraction", "1"],
        format!("{CLF}\n").as_bytes(),
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_input_is_io_error() {
    assert_eq!(run(&["parse", "/nonexistent/access.log"]).status.code(), Some(3));
}

#[test]
fn garbage_ndjson_is_input_error() {
    let out = run_stdin(&["clean"], b"{not json}\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn config_file_env_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mining":{"min_support":1.5}}"#).unwrap();
    let typo = dir.path().join("typo.json");
    std::fs::write(&typo, r#"{"min_suport":0.2}"#).unwrap();
    let seqs = b"{\"session_id\":0,\"items\":[\"a\",\"b\"]}\n{\"session_id\":1,\"items\":[\"a\"]}\n";

    let out = run_stdin(&["--config", path(&bad), "mine", "seq"], seqs);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mining.min_support"));
    let out = run_stdin(&["mine", "seq", "--config", path(&typo)], seqs);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("min_suport"));

    // the environment variable is a fallback for --config
    let high = dir.path().join("high.json");
    std::fs::write(&high, r#"{"mining":{"min_support":1.0}}"#).unwrap();
    let mut child = Command::new(BIN)
        .env(CONFIG_ENV, &high)
        .args(["mine", "seq"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(seqs).unwrap();
    let out = child.wait_with_output().unwrap();
    let report = read_report(&out.stdout).unwrap();
    let Results::Patterns(p) = report.results else { panic!() };
    assert_eq!(p.len(), 1, "only <a> is in every sequence");

    // and flags beat both
    let out = run_stdin(&["--config", path(&high), "mine", "seq", "--min-support", "0.5"], seqs);
    let Results::Patterns(p) = read_report(&out.stdout).unwrap().results else {
        panic!()
    };
    assert_eq!(p.len(), 3);
}

#[test]
fn mine_output_formats() {
    let seqs = b"{\"session_id\":0,\"items\":[\"a\",\"b\"]}\n{\"session_id\":1,\"items\":[\"a\",\"b\"]}\n";
    let csv = ok(&run_stdin(
        &["mine", "rules", "--output-format", "csv", "--min-support", "0.5"],
        seqs,
    ));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("antecedent,consequent,support,confidence,count,antecedent_count")
    );
    assert_eq!(lines.count(), 2);
    let dot = ok(&run_stdin(&["mine", "paths", "--output-format", "dot"], seqs));
    assert_eq!(dot, "digraph {\n  \"a\";\n  \"b\";\n  \"a\" -> \"b\" [label=2];\n}\n");
    let out = run_stdin(&["mine", "rules", "--output-format", "dot"], seqs);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn full_pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"sessions": 120, "users": 12, "planted": [{"pages": ["/page1.html", "/page2.html", "/page3.html"], "support": 0.5}]}"#,
    )
    .unwrap();
    ok(&run(&[
        "gen",
        "--spec",
        path(&spec),
        "--seed",
        "4",
        "--out-dir",
        &d("corpus"),
    ]));
    let truth: GroundTruth = serde_json::from_slice(&std::fs::read(d("corpus/truth.json")).unwrap()).unwrap();
    assert_eq!(truth.planted[0].count, 60);

    ok(&run(&[
        "parse",
        &d("corpus/access.log"),
        "-o",
        &d("parsed.ndjson"),
        "--report",
        &d("report.json"),
    ]));
    ok(&run(&["clean", &d("parsed.ndjson"), "-o", &d("clean.ndjson")]));
    ok(&run(&["sessionize", &d("clean.ndjson"), "-o", &d("sessions.ndjson")]));
    let sessions = std::fs::read_to_string(d("sessions.ndjson")).unwrap();
    assert_eq!(sessions.lines().count(), 120);

    let seq = ok(&run(&[
        "mine",
        "seq",
        &d("sessions.ndjson"),
        "--min-support",
        "0.5",
        "--engine",
        "waptree",
    ]));
    std::fs::write(d("seq.json"), &seq).unwrap();
    let Results::Patterns(p) = read_report(seq.as_bytes()).unwrap().results else {
        panic!()
    };
    assert!(p
        .iter()
        .any(|p| p.items == ["/page1.html", "/page2.html", "/page3.html"] && p.count == 60));

    // referrers in the generated log make every visited step a link
    let filtered = ok(&run(&[
        "filter",
        &d("seq.json"),
        "--topology-from-log",
        &d("corpus/access.log"),
        "--min-length",
        "2",
    ]));
    let report = read_report(filtered.as_bytes()).unwrap();
    assert!(report.meta["topology"].contains("referrer"));
    let Results::Patterns(kept) = report.results else {
        panic!()
    };
    assert!(kept.iter().all(|p| p.items.len() >= 2));
    assert!(kept.len() < p.iter().filter(|p| p.items.len() >= 2).count());

    let topo = dir.path().join("links.csv");
    std::fs::write(&topo, "from,to\n/page1.html,/page2.html\n/page2.html,/page3.html\n").unwrap();
    let filtered = ok(&run(&["filter", &d("seq.json"), "--topology", path(&topo)]));
    let Results::Patterns(kept) = read_report(filtered.as_bytes()).unwrap().results else {
        panic!()
    };
    assert!(!kept
        .iter()
        .any(|p| p.items == ["/page1.html", "/page2.html", "/page3.html"]));

    let ext = ok(&run(&[
        "extend",
        &d("sessions.ndjson"),
        "--events",
        &d("corpus/events.csv"),
    ]));
    for line in ext.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["active_seconds"].as_f64().unwrap() <= v["elapsed_seconds"].as_f64().unwrap());
    }
    assert!(
        ext.lines().any(|l| !l.contains("\"events\":[]")),
        "events never attached"
    );

    ok(&run(&["profile", &d("sessions.ndjson"), "-o", &d("profiles.ndjson")]));
    let first: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(d("profiles.ndjson"))
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    let user = first["user"].as_str().unwrap().to_string();
    let ranked = run_stdin(
        &["rerank", "--profile", &d("profiles.ndjson"), "--user", &user],
        b"/nowhere.html\n/page1.html\n",
    );
    assert_eq!(ok(&ranked).lines().count(), 2);
    let ambiguous = run_stdin(&["rerank", "--profile", &d("profiles.ndjson")], b"/page1.html\n");
    assert_eq!(ambiguous.status.code(), Some(1));
}

#[test]
fn clusters_need_sessions() {
    let seqs = b"{\"session_id\":0,\"items\":[\"a\",\"b\"]}\n";
    assert_eq!(run_stdin(&["mine", "clusters"], seqs).status.code(), Some(1));
}

#[test]
fn same_input_same_bytes() {
    let input = format!("{CLF}\n{CLF}\n");
    let a = run_stdin(&["parse", "--format", "clf", "--workers", "3"], input.as_bytes());
    let b = run_stdin(&["parse", "--format", "clf"], input.as_bytes());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), b.status.code());
}
