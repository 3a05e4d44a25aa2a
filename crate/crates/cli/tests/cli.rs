use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn photobot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photobot")).args(args).output().expect("spawn photobot")
}

fn ok(args: &[&str]) -> Output {
    let out = photobot(args);
    assert!(
        out.status.success(),
        "photobot {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    photobot(args).status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn thresholds_optimize_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pics.jsonl");
    let thr = dir.path().join("baseline.json");
    let report = dir.path().join("eval.json");
    ok(&["synth", "--kind", "thresholds-baseline", "--count", "200", "--seed", "3", "--out", s(&data)]);
    ok(&[
        "optimize-thresholds",
        "--dataset",
        s(&data),
        "--kind",
        "baseline",
        "--generations",
        "20",
        "--seed",
        "1",
        "--out",
        s(&thr),
    ]);
    assert_eq!(read_json(&thr)["kind"], "baseline");
    let curve = fs::read_to_string(dir.path().join("baseline.json.curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("generation,best,mean"));
    assert_eq!(curve.lines().count(), 22);

    let run = read_json(&dir.path().join("baseline.json.run.json"));
    assert_eq!(run["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(run["config"]["generations"], 20);

    ok(&["evaluate", "--dataset", s(&data), "--baseline", s(&thr), "--out", s(&report)]);
    let doc = read_json(&report);
    assert_eq!(doc["command"], "evaluate");
    let method = &doc["report"]["methods"][0];
    assert_eq!(method["method"], "baseline");
    let acc = method["overall"]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let counted: u64 = method["by_category"]
        .as_object()
        .unwrap()
        .values()
        .map(|b| b["count"].as_u64().unwrap())
        .sum();
    assert_eq!(counted, 200);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pics.jsonl");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"count": 7}"#).unwrap();
    ok(&[
        "synth", "--kind", "layouts", "--count", "50", "--out", s(&data), "--config", s(&cfg),
    ]);
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 7);
    let run = read_json(&dir.path().join("pics.jsonl.run.json"));
    assert_eq!(run["config"]["count"], 7);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"cuont": 7}"#).unwrap();
    let out = dir.path().join("x.jsonl");
    assert_eq!(code(&["synth", "--kind", "layouts", "--out", s(&out), "--config", s(&cfg)]), 2);
    assert_eq!(code(&["synth", "--kind", "layouts"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["simulate", "--scenario", "nowhere", "--out", s(&out)]), 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let thr = dir.path().join("t.json");
    assert_eq!(code(&["optimize-thresholds", "--dataset", s(&missing), "--out", s(&thr)]), 3);
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json}\n").unwrap();
    assert_eq!(code(&["ingest", "--input", s(&bad), "--out", s(&thr)]), 3);
}

#[test]
fn ttest_reports_and_flags_zero_variance() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.json");
    fs::write(&a, "3 4 5 4 3\n").unwrap();
    fs::write(&b, "[3, 4, 5, 4, 3]").unwrap();
    let out = dir.path().join("t.json");
    ok(&["ttest", "--a", s(&a), "--b", s(&b), "--out", s(&out)]);
    let doc = read_json(&out);
    assert_eq!(doc["report"]["t"], 0.0);
    assert_eq!(doc["report"]["p_one_sided"], 0.5);

    let flat = dir.path().join("flat.txt");
    fs::write(&flat, "2 2 2").unwrap();
    assert_eq!(code(&["ttest", "--a", s(&flat), "--b", s(&flat)]), 4);
    let short = dir.path().join("short.txt");
    fs::write(&short, "2").unwrap();
    assert_eq!(code(&["ttest", "--a", s(&short), "--b", s(&a)]), 3);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.jsonl");
    let second = dir.path().join("b.jsonl");
    ok(&["simulate", "--scenario", "left_cluster", "--out", s(&first)]);
    ok(&["simulate", "--scenario", "left_cluster", "--out", s(&second)]);
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    let shutters = fs::read_to_string(&first).unwrap().matches(r#""kind":"shutter""#).count();
    assert_eq!(shutters, 20);
    let run = read_json(&dir.path().join("a.jsonl.run.json"));
    assert_eq!(run["summary"]["events"]["shutter"], 20);
}

#[test]
fn render_abstract_writes_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("layouts.jsonl");
    let imgs = dir.path().join("imgs");
    ok(&["synth", "--kind", "layouts", "--count", "3", "--seed", "2", "--out", s(&data)]);
    ok(&["render-abstract", "--dataset", s(&data), "--out-dir", s(&imgs)]);
    let pgms: Vec<_> = fs::read_dir(&imgs)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "pgm"))
        .collect();
    assert_eq!(pgms.len(), 3);
    let bytes = fs::read(pgms[0].path()).unwrap();
    assert!(bytes.starts_with(b"P5\n150 100\n255\n"));
    assert_eq!(bytes.len(), 15 + 150 * 100);
}

/// Three bursts of three pictures; faces carry scores so no face model is needed.
fn fixture(dir: &Path) -> std::path::PathBuf {
    let mut lines = Vec::new();
    for burst in 0..3 {
        for k in 0..3 {
            let x = 2200 + 200 * k + 100 * burst;
            let faces: Vec<String> = (0..=burst)
                .map(|f| {
                    let fx = x + 300 * f;
                    format!(
                        r#"{{"bbox":{{"x_tl":{fx},"y_tl":1500,"x_br":{},"y_br":2200}},"features":{{"roll":0,"pitch":0,"yaw":0,"joy":0.9,"sorrow":0,"anger":0,"surprise":0,"exposure":0.5,"blur":0.1}},"score":0.8}}"#,
                        fx + 250
                    )
                })
                .collect();
            lines.push(format!(
                r#"{{"picture_id":"b{burst}-p{k}","burst_id":"b{burst}","width":6000,"height":4000,"label":"good","faces":[{}]}}"#,
                faces.join(",")
            ));
        }
    }
    let path = dir.join("bursts.jsonl");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

#[test]
fn select_respects_quota_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path());
    let thr = dir.path().join("h.json");
    fs::write(
        &thr,
        r#"{"kind":"heuristic","x_min":0.05,"x_max":0.95,"y_min":0.05,"y_max":0.95,"occ_min":0.001,"occ_max":0.5,"r_min":0.5,"p_min":0.5}"#,
    )
    .unwrap();
    let base = dir.path().join("b.json");
    fs::write(
        &base,
        r#"{"kind":"baseline","x_min":0.05,"x_max":0.95,"y_min":0.05,"y_max":0.95,"occ_min":0.001,"occ_max":0.5}"#,
    )
    .unwrap();
    let first = dir.path().join("sel1.json");
    let second = dir.path().join("sel2.json");
    for out in [&first, &second] {
        ok(&[
            "select", "--dataset", s(&data), "--baseline", s(&base), "--heuristic", s(&thr), "--quota", "1", "--out",
            s(out),
        ]);
    }
    let doc = read_json(&first);
    assert_eq!(doc["report"], read_json(&second)["report"]);
    let entries = doc["report"]["entries"].as_array().unwrap();
    for method in ["baseline", "heuristic"] {
        let picks: Vec<&Value> = entries.iter().filter(|e| e["method"] == method).collect();
        assert!(!picks.is_empty() && picks.len() <= 3, "{method}: {picks:?}");
        for cat in ["one", "two", "three_plus"] {
            assert!(picks.iter().filter(|e| e["category"] == cat).count() <= 1);
        }
    }
}

#[test]
fn heuristic_without_scores_names_face_quality() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path());
    let text = fs::read_to_string(&data).unwrap().replace(r#","score":0.8"#, "");
    fs::write(&data, text).unwrap();
    let thr = dir.path().join("h.json");
    fs::write(
        &thr,
        r#"{"kind":"heuristic","x_min":0.05,"x_max":0.95,"y_min":0.05,"y_max":0.95,"occ_min":0.001,"occ_max":0.5,"r_min":0.5,"p_min":0.5}"#,
    )
    .unwrap();
    let out = photobot(&["evaluate", "--dataset", s(&data), "--heuristic", s(&thr), "--out", s(&dir.path().join("e.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("face_quality"));
}

#[test]
fn split_and_train_face_ann() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("faces.jsonl");
    let parts = dir.path().join("parts");
    let model = dir.path().join("ann.tnet");
    ok(&["synth", "--kind", "faces", "--count", "300", "--seed", "4", "--out", s(&data)]);
    ok(&["split", "--dataset", s(&data), "--out-dir", s(&parts), "--seed", "2"]);
    let train = parts.join("train.jsonl");
    let n_train = fs::read_to_string(&train).unwrap().lines().count();
    let n_test = fs::read_to_string(parts.join("test.jsonl")).unwrap().lines().count();
    let n_val = fs::read_to_string(parts.join("validation.jsonl")).unwrap().lines().count();
    assert_eq!(n_train + n_test + n_val, 300);
    assert!(parts.join("split.run.json").exists());

    ok(&["train-face-ann", "--dataset", s(&train), "--epochs", "3", "--seed", "5", "--out", s(&model)]);
    let run = read_json(&dir.path().join("ann.tnet.run.json"));
    assert_eq!(run["config"]["epochs"], 3);
    assert_eq!(run["config"]["weight_decay"], 0.01);
    assert_eq!(run["summary"]["loss_history"].as_array().unwrap().len(), 3);
    let bytes = fs::read(&model).unwrap();
    let again = dir.path().join("again.tnet");
    ok(&["train-face-ann", "--dataset", s(&train), "--epochs", "3", "--seed", "5", "--out", s(&again)]);
    assert_eq!(bytes, fs::read(&again).unwrap());
}
