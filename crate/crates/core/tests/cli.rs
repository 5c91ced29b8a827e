use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dog_kgqa::synth::{generate, SynthConfig};

const TWO_HOP_Q: &str = "In what year was the movie [Joe Anderson] starring in released";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/high_life")
        .join(name)
}

fn dog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture_args(out: &Path) -> Vec<String> {
    vec![
        "--kg".into(),
        fixture("kb.txt").display().to_string(),
        "--rules".into(),
        fixture("rules.json").display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ]
}

fn with<'a>(head: &[&'a str], tail: &'a [String]) -> Vec<&'a str> {
    head.iter().copied().chain(tail.iter().map(String::as_str)).collect()
}

#[test]
fn ask_walks_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let args = fixture_args(dir.path());
    let o = dog(&with(&["ask", TWO_HOP_Q, "--hops", "2"], &args));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("answer: 2009"), "{text}");
    assert!(text.contains("source: triple"));
    assert!(text.contains("steps: 2"));

    let trace = dir.path().join("traces/ask.json");
    let o = dog(&["trace", trace.to_str().unwrap()]);
    let rendered = stdout(&o);
    assert_eq!(rendered.matches("debate_turn").count(), 3);
    assert!(rendered.contains("[step 2"));
    assert!(!rendered.contains("[step 3"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let args = fixture_args(dir.path());
    let o = dog(&with(&["ask", "who is this"], &args));
    assert_eq!(o.status.code(), Some(2));
    let o = dog(&["ask", "x [y]", "--kg", "/no/such/kb.txt", "--rules", "r.json"]);
    assert_eq!(o.status.code(), Some(2));
    let ds = fixture("qa_2hop.txt").display().to_string();
    let o = dog(&with(&["eval", "--dataset", &ds, "--sample", "0"], &args));
    assert_eq!(o.status.code(), Some(2));
    let o = dog(&["eval", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wrong_answers_still_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let qa = dir.path().join("qa.txt");
    fs::write(&qa, format!("{TWO_HOP_Q}\t1999\n")).unwrap();
    let args = fixture_args(dir.path());
    let o = dog(&with(
        &["eval", "--hops", "2", "--dataset", qa.to_str().unwrap()],
        &args,
    ));
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("hits@1=0.000 n=1"));
    let o = dog(&[
        "trace",
        dir.path().join("report.json").to_str().unwrap(),
        "--failures-only",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("tag: answer_aliasing") || stdout(&o).contains("tag: answer_generation"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture("qa_2hop.txt").display().to_string();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let args = fixture_args(&out);
        let o = dog(&with(&["eval", "--hops", "2", "--dataset", &ds], &args));
        assert!(o.status.success());
        let text = fs::read_to_string(out.join("report.json")).unwrap();
        reports.push(text.replace(out.to_str().unwrap(), "OUT"));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn config_file_fills_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = generate(&SynthConfig::default());
    fs::write(dir.path().join("kb.txt"), fixture.kb_text()).unwrap();
    fs::write(dir.path().join("qa.tsv"), fixture.tabular(2)).unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        format!(
            "# synthetic run\nkg = {:?}\nprovider = \"oracle\"\ndataset = {:?}\ndataset-format = \"tabular\"\nsample = 5\nout = {:?}\n",
            dir.path().join("kb.txt"),
            dir.path().join("qa.tsv"),
            dir.path().join("out"),
        ),
    )
    .unwrap();
    let o = dog(&["eval", "--config", conf.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("hits@1=1.000 n=5"));
    let o = dog(&["eval", "--config", conf.to_str().unwrap(), "--sample", "9"]);
    assert!(stdout(&o).starts_with("hits@1=1.000 n=9"));

    fs::write(&conf, "samples = 3\n").unwrap();
    assert_eq!(
        dog(&["eval", "--config", conf.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn ablate_and_sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = generate(&SynthConfig {
        chains: 8,
        ..SynthConfig::default()
    });
    let kb = dir.path().join("kb.txt");
    let qa = dir.path().join("qa.tsv");
    fs::write(&kb, fixture.kb_text()).unwrap();
    fs::write(&qa, fixture.tabular(3)).unwrap();
    let common = [
        "--kg",
        kb.to_str().unwrap(),
        "--provider",
        "oracle",
        "--dataset",
        qa.to_str().unwrap(),
        "--dataset-format",
        "tabular",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    let o = dog(&[&["ablate"][..], &common].concat());
    assert!(o.status.success());
    let table = stdout(&o);
    let rows: Vec<&str> = table
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .collect();
    assert_eq!(rows.len(), 5, "{table}");
    assert!(rows[0].contains("w/o SF and QS") && rows[0].trim_end().ends_with('8'));
    assert!(rows[4].contains("w/ SF and QS'") && rows[4].contains("+0.0"));

    let o = dog(&[&["sweep", "--axis", "rounds"][..], &common].concat());
    let rows = stdout(&o)
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .count();
    assert_eq!(rows, 3);
    let o = dog(&[&["sweep", "--axis", "exemplars-rf", "--values", "0,2"][..], &common].concat());
    assert!(o.status.success());
    assert!(stdout(&o).contains("exemplars.relation_filtering=2"));
    assert_eq!(
        dog(&[&["sweep", "--axis", "nope"][..], &common].concat()).status.code(),
        Some(2)
    );
}

#[test]
fn trace_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    fs::write(
        &empty,
        r#"{"id":"x","question":"q","config":{},"events":[],"answer":null,"failure":null,"steps":0,"wall_time_ms":0}"#,
    )
    .unwrap();
    let o = dog(&["trace", empty.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("no events"));

    let unknown = dir.path().join("unknown.json");
    fs::write(
        &unknown,
        r#"{"id":"x","question":"q","config":{},"events":[{"step":1,"elapsed_ms":0,"kind":"teleport","payload":{}}],"answer":null,"failure":null,"steps":0,"wall_time_ms":0}"#,
    )
    .unwrap();
    let o = dog(&["trace", unknown.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("teleport"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_ne!(dog(&["trace", bad.to_str().unwrap()]).status.code(), Some(0));
}
