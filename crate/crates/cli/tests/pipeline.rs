//! Runs the `pmivec` binary end to end on the bundled fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn pmivec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmivec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = pmivec(args);
    assert!(
        out.status.success(),
        "pmivec {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

struct Stage {
    vocab: PathBuf,
    pmi: PathBuf,
    stats: PathBuf,
    model: PathBuf,
}

fn prepare(dir: &Path, corpus: &Path, min_count: &str) -> Stage {
    let st = Stage {
        vocab: dir.join("vocab.tsv"),
        pmi: dir.join("pmi.bin"),
        stats: dir.join("pmi.stats"),
        model: dir.join("model"),
    };
    ok(&["vocab", "--corpus", s(corpus), "--min-count", min_count, "--out", s(&st.vocab)]);
    ok(&[
        "cooccur", "--corpus", s(corpus), "--vocab", s(&st.vocab), "--window", "2", "--subsample", "0",
        "--out", s(&st.pmi),
    ]);
    st
}

fn train_args<'a>(st: &'a Stage, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["train", "--pmi", s(&st.pmi), "--vocab", s(&st.vocab), "--out-dir", s(&st.model)];
    v.extend_from_slice(extra);
    v
}

#[test]
fn exact_instance_trains_to_small_loss() {
    let dir = tempfile::tempdir().unwrap();
    let st = prepare(dir.path(), &fixture("markov20.txt"), "1");
    ok(&train_args(
        &st,
        &["--variant", "d", "--dim", "32", "--epochs", "500", "--lr", "0.05", "--k", "0", "--seed", "3"],
    ));
    let loss = std::fs::read_to_string(st.model.join("loss.csv")).unwrap();
    let mut lines = loss.lines();
    assert_eq!(lines.next(), Some("epoch,mean_positive_loss,mean_negative_loss"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 500);
    let last: Vec<f64> = rows[499].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(last[0], 500.0);
    assert!(last[1] < 1e-3, "final loss {}", last[1]);
    // 20 words, header plus one row each
    let w = std::fs::read_to_string(st.model.join("w.vec")).unwrap();
    assert_eq!(w.lines().next(), Some("20 32"));
}

#[test]
fn unknown_subset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.tsv");
    std::fs::write(&data, "a\tb\t1.0\n").unwrap();
    let out = pmivec(&[
        "eval", "--embeddings", s(dir.path()), "--task", "similarity", "--dataset", s(&data), "--subset", "BOTH",
        "--out", s(&dir.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--subset"));
}

#[test]
fn usage_and_runtime_errors_use_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let st = prepare(dir.path(), &fixture("corpus_1000.txt"), "1");

    let out = pmivec(&["train", "--pmi", s(&st.pmi), "--out-dir", s(&st.model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--vocab"));

    let out = pmivec(&train_args(&st, &["--alpha1", "-0.5"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--alpha1"));

    let missing = dir.path().join("absent.bin");
    let out = pmivec(&["train", "--pmi", s(&missing), "--vocab", s(&st.vocab), "--out-dir", s(&st.model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.bin"));

    // a vocabulary from a different min_count no longer matches the matrix
    let other = dir.path().join("vocab5.tsv");
    ok(&["vocab", "--corpus", s(&fixture("corpus_1000.txt")), "--min-count", "5", "--out", s(&other)]);
    let out = pmivec(&["train", "--pmi", s(&st.pmi), "--vocab", s(&other), "--out-dir", s(&st.model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vocab5.tsv"));

    let out = pmivec(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

/// Every derived input must be an output of a producer, with the same digest.
fn assert_chained(manifest: &Value, producers: &[&Value]) {
    for input in manifest["inputs"].as_array().unwrap() {
        if input["role"] == "corpus" || input["role"] == "dataset" {
            continue;
        }
        let path = input["path"].as_str().unwrap();
        let produced = producers
            .iter()
            .flat_map(|m| m["outputs"].as_array().unwrap())
            .find(|o| o["path"] == path)
            .unwrap_or_else(|| panic!("{path} has no producer"));
        assert_eq!(produced["sha256"], input["sha256"], "{path}");
    }
}

#[test]
fn full_pipeline_chains_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = fixture("corpus_1000.txt");
    let st = prepare(d, &corpus, "1");
    ok(&train_args(&st, &["--variant", "l", "--dim", "8", "--epochs", "10", "--k", "2"]));

    let sim = d.join("sim.tsv");
    std::fs::write(&sim, "word1\tword2\tscore\nthe\tof\t3.0\nand\tin\t5.5\nto\ta\t1.0\nthe\tzzz\t2.0\n").unwrap();
    let report = d.join("eval.json");
    let out = ok(&[
        "eval", "--embeddings", s(&st.model), "--vectors", "A", "--task", "similarity", "--dataset", s(&sim),
        "--out", s(&report),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"score\""));
    let geo = d.join("geo");
    ok(&["geometry", "--embeddings", s(&st.model), "--pmi", s(&st.pmi), "--stats", s(&st.stats), "--out-dir", s(&geo)]);
    let csv = d.join("contours.csv");
    ok(&[
        "contours", "--embeddings", s(&st.model), "--stats", s(&st.stats), "--context", "the", "--centers",
        "-4,-3,-2", "--out", s(&csv), "--plot", s(&d.join("contours.svg")),
    ]);

    let vocab_m = json(&d.join("vocab.tsv.manifest.json"));
    let cooccur_m = json(&d.join("pmi.bin.manifest.json"));
    let train_m = json(&st.model.join("manifest.json"));
    let eval_m = json(&d.join("eval.json.manifest.json"));
    let geo_m = json(&geo.join("manifest.json"));
    let contour_m = json(&d.join("contours.csv.manifest.json"));

    assert_eq!(vocab_m["inputs"][0]["role"], "corpus");
    assert_chained(&cooccur_m, &[&vocab_m]);
    assert_chained(&train_m, &[&vocab_m, &cooccur_m]);
    for m in [&eval_m, &geo_m, &contour_m] {
        assert_chained(m, &[&cooccur_m, &train_m]);
    }
    // the last stage carries every earlier configuration
    let stages: Vec<&str> = contour_m["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["stage"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["vocab", "cooccur", "train"]);
    assert_eq!(contour_m["history"][2]["config"]["dim"], 8);
    assert_eq!(train_m["config"]["variant"], "l");
    assert_eq!(cooccur_m["config"]["window"], 2);
    assert!(train_m["version"].is_string() && train_m["created_unix"].as_u64().unwrap() > 0);
    let outputs: Vec<&str> = train_m["outputs"].as_array().unwrap().iter().map(|o| o["role"].as_str().unwrap()).collect();
    assert_eq!(outputs, ["w", "c", "a", "loss"]);

    let r = json(&report);
    assert_eq!(r["vectors_used"], "A");
    assert_eq!(r["subset"], "ALL");
    assert_eq!(r["n_scored"], 3);
    assert_eq!(r["n_skipped"], 1);

    let g = json(&geo.join("geometry.json"));
    assert_eq!(g["words"], 64);
    assert!(g["conjugate_identity"]["max_abs"].as_f64().unwrap() <= 1e-10);
    assert!(g["pair_checks"]["sampled_pairs"].as_u64().unwrap() > 0);
    let gcsv = std::fs::read_to_string(geo.join("geometry.csv")).unwrap();
    assert_eq!(gcsv.lines().next(), Some("word,norm_w,norm_c,internal_angle,min_length,self_pmi"));
    assert_eq!(gcsv.lines().count(), 65);

    let rows = pmivec::contours::load_contour_csv(&csv).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| (r.log_prob - r.bucket).abs() <= 0.4 + 1e-12));
    assert!(std::fs::read_to_string(d.join("contours.svg")).unwrap().starts_with("<svg"));
}

fn read_outputs(dir: &Path) -> Vec<Vec<u8>> {
    ["w.vec", "c.vec", "a.vec", "loss.csv"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn pipeline_is_deterministic_and_idempotent() {
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    let corpus = fixture("corpus_1000.txt");
    let flags = ["--variant", "p", "--dim", "8", "--epochs", "20", "--k", "2", "--seed", "11"];
    let a = prepare(one.path(), &corpus, "1");
    let b = prepare(two.path(), &corpus, "1");
    assert_eq!(std::fs::read(&a.pmi).unwrap(), std::fs::read(&b.pmi).unwrap());
    ok(&train_args(&a, &flags));
    ok(&train_args(&b, &flags));
    let first = read_outputs(&a.model);
    assert_eq!(first, read_outputs(&b.model));

    // re-running into the same directory overwrites with identical bytes
    ok(&train_args(&a, &flags));
    assert_eq!(first, read_outputs(&a.model));

    let other = ["--variant", "p", "--dim", "8", "--epochs", "20", "--k", "2", "--seed", "12"];
    ok(&train_args(&b, &other));
    assert_ne!(first[0], read_outputs(&b.model)[0]);
}

#[test]
fn config_file_fills_in_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let st = prepare(dir.path(), &fixture("corpus_1000.txt"), "1");
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"threads": 1, "train": {"dim": 6, "epochs": 3, "negatives": 1}}"#).unwrap();

    ok(&[&["--config", s(&cfg)][..], &train_args(&st, &[])].concat());
    let header = |p: &Path| std::fs::read_to_string(p).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header(&st.model.join("w.vec")), "64 6");
    assert_eq!(json(&st.model.join("manifest.json"))["config"]["epochs"], 3);

    ok(&[&["--config", s(&cfg)][..], &train_args(&st, &["--dim", "4"])].concat());
    assert_eq!(header(&st.model.join("w.vec")), "64 4");

    std::fs::write(&cfg, r#"{"train": {"dims": 6}}"#).unwrap();
    let out = pmivec(&[&["--config", s(&cfg)][..], &train_args(&st, &[])].concat());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.dims"));
}

#[test]
fn plot_failure_keeps_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let st = prepare(dir.path(), &fixture("corpus_1000.txt"), "1");
    ok(&train_args(&st, &["--dim", "4", "--epochs", "2", "--k", "1"]));
    let csv = dir.path().join("c.csv");
    let plot = dir.path().join("no-such-dir").join("c.svg");
    ok(&[
        "contours", "--embeddings", s(&st.model), "--stats", s(&st.stats), "--context", "of", "--out", s(&csv),
        "--plot", s(&plot),
    ]);
    assert!(csv.exists());
    assert!(!plot.exists());
    let m = json(&dir.path().join("c.csv.manifest.json"));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 1);
}
