use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_markov-order"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_corpus(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("paths.tsv");
    let mut text = String::new();
    for i in 0..60 {
        let line: Vec<&str> = ["a", "b", "c", "a", "c", "b", "b"].iter().cycle().skip(i % 5).take(2 + i % 6).copied().collect();
        text.push_str(&line.join("\t"));
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn select_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = run(
        &["select", "--input", "paths.tsv", "--max-order", "3", "--alpha", "1", "--folds", "10", "--seed", "7", "--out", "report.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["log_likelihood"].as_array().unwrap().len(), 4);
    assert!(report["recommendation"].as_u64().unwrap() <= 3);
}

#[test]
fn select_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    for out in ["r1.json", "r2.json"] {
        let o = run(&["select", "--input", "paths.tsv", "--max-order", "2", "--seed", "3", "--topk", "2", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("r1.json")).unwrap();
    let b = std::fs::read(dir.path().join("r2.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn select_csv_panels() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = run(&["select", "--input", "paths.tsv", "--max-order", "2", "--format", "csv", "--out", "panels"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let b = std::fs::read_to_string(dir.path().join("panels/panel_b_lrt.csv")).unwrap();
    assert!(b.starts_with("k,m,eta,df,p_value,stars,adjacent"));
}

#[test]
fn missing_file_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["select", "--input", "nope.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.tsv"));
}

#[test]
fn max_order_zero_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = run(&["select", "--input", "paths.tsv", "--max-order", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("max order"));
}

#[test]
fn reserved_label_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.tsv"), "a\tRESET\tb\n").unwrap();
    let o = run(&["select", "--input", "bad.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_is_deterministic_and_writes_truth() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["g1.tsv", "g2.tsv"] {
        let o = run(
            &["generate", "markov", "--order", "2", "--states", "5", "--concentration", "0.1", "--clicks", "5000", "--seed", "1", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("g1.tsv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("g2.tsv")).unwrap());
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g1.tsv.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["chain"]["order"], 2);
    assert_eq!(truth["chain"]["rows"].as_array().unwrap().len(), 36);

    let o = run(&["generate", "uniform", "--states", "26", "--clicks", "2000", "--seed", "1", "--out", "u.tsv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["generate", "sticky", "--states", "4", "--stay", "0.9", "--paths", "50", "--out", "s.tsv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn generate_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "uniform", "--states", "1", "--clicks", "100", "--out", "u.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["generate", "sticky", "--states", "3", "--stay", "1.5", "--clicks", "100", "--out", "s.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn structure_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = run(
        &[
            "structure", "--input", "paths.tsv", "--heatmap", "heat.csv", "--graph", "graph.json", "--graph-order", "2",
            "--anchor", "a", "--centrality", "outgoing", "--self-profile", "profile.csv", "--max-order", "3", "--top", "2",
            "--split-endpoints", "split",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let heat = std::fs::read_to_string(dir.path().join("heat.csv")).unwrap();
    let lines: Vec<_> = heat.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "from,RESET,a,b,c");
    let graph: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("graph.json")).unwrap()).unwrap();
    assert!(graph["nodes"].is_array() && graph["edges"].is_array());
    let profile = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("state,k,stay,switch\n"));
    assert!(dir.path().join("split_same.csv").exists());
    assert!(dir.path().join("split_different.csv").exists());
}

#[test]
fn structure_heatmap_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = run(&["structure", "--input", "paths.tsv", "--heatmap"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("from,RESET"));
}

#[test]
fn structure_needs_an_output() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = run(&["structure", "--input", "paths.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn threads_option_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = run(&["--threads", "2", "select", "--input", "paths.tsv", "--max-order", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["--threads", "0", "select", "--input", "paths.tsv", "--max-order", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
