use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn regwatch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regwatch")).current_dir(dir).args(args).output().unwrap()
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ingest_skips_corrupt_documents() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    fs::create_dir(&src).unwrap();
    for id in ["0001", "0002", "0003"] {
        let name = format!("fr-2024-{id}.json");
        fs::copy(fixtures().join("golden/articles").join(&name), src.join(&name)).unwrap();
    }
    fs::write(src.join("broken.json"), "{\"id\": \"broken\",").unwrap();

    let o = regwatch(tmp.path(), &["ingest", "--source", "src", "--since", "2024-01-01", "--out", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["articles_processed"], 3);
    assert_eq!(r["diagnostics"].as_array().unwrap().len(), 1);
    assert!(r["diagnostics"][0].as_str().unwrap().contains("MalformedInput"));
    assert_eq!(fs::read_dir(tmp.path().join("out")).unwrap().count(), 3);
}

#[test]
fn ingest_since_filters_by_date() {
    let tmp = tempfile::tempdir().unwrap();
    let articles = fixtures().join("golden/articles");
    let o = regwatch(tmp.path(), &["ingest", "--source", articles.to_str().unwrap(), "--since", "2999-01-01", "--out", "out"]);
    assert!(o.status.success());
    assert_eq!(report(&o)["articles_processed"], 0);
}

#[test]
fn extract_on_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let o = regwatch(tmp.path(), &["extract", "--articles", "empty", "--out", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&o);
    assert_eq!(r["instances_written"], 0);
    assert_eq!(r["mean_summarization_ratio"], Value::Null);
}

#[test]
fn empty_rules_file_yields_no_alerts() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("rules.txt"), "").unwrap();
    let instances = fixtures().join("golden/instances");
    let o = regwatch(
        tmp.path(),
        &["notify", "--instances", instances.to_str().unwrap(), "--rules", "rules.txt", "--out", "alerts.jsonl"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(report(&o)["alerts_emitted"], 0);
    assert_eq!(fs::read(tmp.path().join("alerts.jsonl")).unwrap(), b"");
}

#[test]
fn cyclic_taxonomy_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let f = fixtures();
    let o = regwatch(
        tmp.path(),
        &[
            "notify",
            "--instances",
            f.join("golden/instances").to_str().unwrap(),
            "--rules",
            f.join("notify/roles.txt").to_str().unwrap(),
            "--taxonomy",
            f.join("notify/cyclic_taxonomy.tsv").to_str().unwrap(),
            "--out",
            "alerts.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CycleDetected"), "{}", stderr(&o));
    assert!(!tmp.path().join("alerts.jsonl").exists());
}

#[test]
fn bad_rule_syntax_reports_position() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("rules.txt"), "subscriber x\nwhen direction ~ \"increase\"\n").unwrap();
    let instances = fixtures().join("golden/instances");
    let o = regwatch(
        tmp.path(),
        &["notify", "--instances", instances.to_str().unwrap(), "--rules", "rules.txt", "--out", "a.jsonl"],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("SyntaxError") && err.contains("2:16"), "{err}");
}

#[test]
fn unreachable_source_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let o = regwatch(tmp.path(), &["ingest", "--source", "http://127.0.0.1:9/feed", "--since", "2024-01-01", "--out", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SourceUnavailable"), "{}", stderr(&o));
}

#[test]
fn malformed_graph_file_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("g.tsv"), "garbage\n").unwrap();
    let o = regwatch(tmp.path(), &["graph", "query", "--graph", "g.tsv", "*", "HELD_BY", "*"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MalformedInput"), "{}", stderr(&o));
}

#[test]
fn dangling_parent_is_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let nic = fixtures().join("nic/institutions.csv");
    let o = regwatch(tmp.path(), &["graph", "build", "--nic", nic.to_str().unwrap(), "--out", "g.tsv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("DanglingParent"));
    let q = regwatch(tmp.path(), &["graph", "query", "--graph", "g.tsv", "*", "HELD_BY", "rssd:2002"]);
    assert!(q.status.success());
    assert_eq!(String::from_utf8(q.stdout).unwrap().lines().count(), 1);
}

#[test]
fn quiet_suppresses_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let nic = fixtures().join("nic/institutions.csv");
    let o = regwatch(tmp.path(), &["--quiet", "graph", "build", "--nic", nic.to_str().unwrap(), "--out", "g.tsv"]);
    assert!(o.status.success());
    assert!(o.stderr.is_empty());
}

#[test]
fn unsupported_query_pattern_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let nic = fixtures().join("nic/institutions.csv");
    regwatch(tmp.path(), &["graph", "build", "--nic", nic.to_str().unwrap(), "--out", "g.tsv"]);
    let o = regwatch(tmp.path(), &["graph", "query", "--graph", "g.tsv", "*", "*", "*", "*"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("UnsupportedPattern"), "{}", stderr(&o));
}
