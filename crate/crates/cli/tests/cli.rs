use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aste(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aste"))
        .args(args)
        .current_dir(cwd)
        .env("ASTE_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stdout:\n{}\nstderr:\n{}", stdout(o), stderr(o));
}

#[test]
fn synth_train_extract_eval_crossval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&aste(&["synth", "--reviews", "120", "--out", "data"], d));
    for f in ["corpus.jsonl", "aspects.txt", "opinions.txt", "config.toml"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }
    ok(&aste(&["validate", "data/corpus.jsonl"], d));

    let stats = aste(&["stats", "data/corpus.jsonl", "--out", "stats"], d);
    ok(&stats);
    assert!(stdout(&stats).contains("total"));
    assert!(d.join("stats/stats.json").exists());

    let train = aste(&["train", "--config", "data/config.toml"], d);
    ok(&train);
    let log: serde_json::Value = serde_json::from_str(&stdout(&train)).unwrap();
    assert_eq!(log["reviews"], 120);
    assert!(d.join("data/bundle/manifest.json").exists());

    let extract = aste(&["extract", "--bundle", "data/bundle", "--text", "ব্যাটারি খুব ভালো"], d);
    ok(&extract);
    let line: serde_json::Value = serde_json::from_str(stdout(&extract).trim()).unwrap();
    assert_eq!(line["triplets"][0]["aspect"]["text"], "ব্যাটারি");
    assert_eq!(line["triplets"][0]["polarity"], "positive");

    ok(&aste(&["extract", "--bundle", "data/bundle", "data/corpus.jsonl", "--out", "ext"], d));
    assert_eq!(fs::read_to_string(d.join("ext/extractions.jsonl")).unwrap().lines().count(), 120);

    let eval = aste(&["eval", "--config", "data/config.toml", "--out", "eval"], d);
    ok(&eval);
    assert!(stdout(&eval).contains("Aspect Term Extraction"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);

    let cv = aste(&["crossval", "--config", "data/config.toml", "--set", "eval.k=3", "--out", "cv"], d);
    ok(&cv);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("cv/report.json")).unwrap()).unwrap();
    assert_eq!(report["fold_details"].as_array().unwrap().len(), 3);
}

#[test]
fn digest_mismatch_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&aste(&["synth", "--reviews", "60", "--out", "data"], d));
    ok(&aste(&["train", "--config", "data/config.toml"], d));
    let args = ["extract", "--config", "data/config.toml", "--set", "spanex.tau_s=0.3", "--text", "দাম বেশি"];
    let o = aste(&args, d);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("digest mismatch"));
    let mut allowed = args.to_vec();
    allowed.push("--allow-digest-mismatch");
    ok(&aste(&allowed, d));
}

#[test]
fn ingest_three_row_export() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("export.csv"),
        "text,date\nক্যামেরা খুব ভালো,2024-05-01\n😍😍😍,2024-05-02\nক্যামেরা  খুব ভালো,2024-05-03\n",
    )
    .unwrap();
    let o = aste(&["ingest", "export.csv", "--platform", "daraz", "--date-column", "date", "--out", "ing"], d);
    ok(&o);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["input"], 3);
    assert_eq!(report["accepted"], 1);
    assert_eq!(report["duplicates_removed"], 1);
    let corpus = fs::read_to_string(d.join("ing/corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 1);
    ok(&aste(&["validate", "--allow-unannotated", "ing/corpus.jsonl"], d));
    let strict = aste(&["validate", "ing/corpus.jsonl"], d);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn unreadable_path_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = aste(&["validate", "nowhere/corpus.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere/corpus.jsonl"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(aste(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(aste(&["ingest", "x.csv", "--platform", "myspace"], dir.path()).status.code(), Some(1));
    assert_eq!(aste(&["--help"], dir.path()).status.code(), Some(0));
}

const TEXT: &str = "ব্যাটারি খুব ভালো";

fn record(id: &str, polarity: &str, with_gold: bool) -> String {
    let triplet = format!("{{\"aspect\":{{\"start\":0,\"end\":8}},\"opinion\":{{\"start\":9,\"end\":17}},\"polarity\":\"{polarity}\"}}");
    let gold = if with_gold { format!(",\"gold\":[{triplet}]") } else { String::new() };
    format!(
        "{{\"id\":\"{id}\",\"platform\":\"daraz\",\"text\":\"{TEXT}\",\"annotations\":[{{\"annotator\":\"a\",\"triplets\":[{triplet}]}},{{\"annotator\":\"b\",\"triplets\":[{triplet}]}}]{gold}}}\n"
    )
}

#[test]
fn single_class_training_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let body: String = (0..10).map(|i| record(&format!("r{i}"), "positive", true)).collect();
    fs::write(d.join("corpus.jsonl"), body).unwrap();
    let o = aste(&["train", "corpus.jsonl", "--out", "bundle"], d);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("polarity"), "{}", stderr(&o));
}

#[test]
fn stats_on_unadjudicated_corpus_lists_ids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let body = record("done", "negative", true) + &record("todo-1", "negative", false) + &record("todo-2", "positive", false);
    fs::write(d.join("corpus.jsonl"), body).unwrap();
    let o = aste(&["stats", "corpus.jsonl"], d);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("todo-1") && err.contains("todo-2") && !err.contains("done"), "{err}");

    ok(&aste(&["adjudicate", "corpus.jsonl", "--out", "adj"], d));
    ok(&aste(&["stats", "adj/corpus.jsonl"], d));
}

#[test]
fn config_show_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = aste(&["config", "show"], d);
    ok(&base);
    let text = stdout(&base);
    assert!(text.starts_with("# digest "));
    assert!(text.contains("tau_m = 0.4"));

    let tweaked = aste(&["config", "show", "--set", "pairmatch.tau_m=0.55", "--seed", "9"], d);
    ok(&tweaked);
    let t = stdout(&tweaked);
    assert!(t.contains("tau_m = 0.55"));
    assert_ne!(t.lines().next(), text.lines().next());

    let bad = aste(&["config", "show", "--set", "pairmatch.nonsense=1"], d);
    assert_eq!(bad.status.code(), Some(1));
}
