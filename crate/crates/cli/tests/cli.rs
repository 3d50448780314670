use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sincfront::filter::mel_init_cutoffs;

const TINY: &str = r#"
seed = 3

[corpus]
sample_rate = 8000.0
n_classes = 2
train_utterances = 3
train_total_s = [3.0, 3.5]
test_utterances = 2
test_duration_s = [0.5, 0.8]

[network]
fc_layers = [16]
[network.frontend]
filters = 8
length = 31
[[network.conv_blocks]]
filters = 4
kernel = 5
pool = 3

[train]
epochs = 2
batch_size = 16
"#;

fn sincfront(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sincfront"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = sincfront(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn gen_tiny(dir: &Path) -> PathBuf {
    let cfg = write_config(dir, "tiny.toml", TINY);
    let out = dir.join("corpus");
    ok(&["--config", s(&cfg), "--out", s(&out), "gen-corpus"]);
    out.join("manifest.jsonl")
}

#[test]
fn gen_corpus_writes_both_classes_and_splits() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_tiny(dir.path());
    let text = std::fs::read_to_string(&manifest).unwrap();
    let entries: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(entries.len(), 2 * (3 + 2));
    for class in [0, 1] {
        for split in ["train", "test"] {
            assert!(entries.iter().any(|e| e["class"] == class && e["split"] == split));
        }
    }
    assert!(dir.path().join("corpus/config.json").is_file());
    assert!(!dir.path().join("corpus/.sincfront.lock").exists());
}

#[test]
fn gen_corpus_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.toml", TINY);
    for name in ["a", "b"] {
        ok(&["--config", s(&cfg), "--out", s(&dir.path().join(name)), "gen-corpus"]);
    }
    let wavs: Vec<_> = std::fs::read_dir(dir.path().join("a/wav")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(wavs.len(), 10);
    for w in wavs {
        let a = std::fs::read(dir.path().join("a/wav").join(&w)).unwrap();
        let b = std::fs::read(dir.path().join("b/wav").join(&w)).unwrap();
        assert_eq!(a, b, "{w:?}");
    }
    for f in ["manifest.jsonl", "config.json", "signatures.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn resonance_above_nyquist_is_refused_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        r#"
        [corpus]
        sample_rate = 8000.0
        [[corpus.classes]]
        f0_hz = 120.0
        resonances = [{ center_hz = 700.0, bandwidth_hz = 90.0 }]
        [[corpus.classes]]
        f0_hz = 180.0
        resonances = [{ center_hz = 4500.0, bandwidth_hz = 90.0 }]
        "#,
    );
    let out = sincfront(&["--config", s(&cfg), "--out", s(&dir.path().join("o")), "gen-corpus"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error: invalid-spec: "), "{err}");
    assert!(err.contains("classes[1].resonances[0].center_hz"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn unknown_config_key_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"train": {"epoch": 3}}"#);
    let out = sincfront(&["--config", s(&cfg), "--out", s(&dir.path().join("o")), "gen-corpus"]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error: config: "));
}

#[test]
fn missing_manifest_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = sincfront(&[
        "--out",
        s(&dir.path().join("o")),
        "train",
        "--manifest",
        s(&dir.path().join("nope.jsonl")),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error: io: "), "{}", stderr(&out));
}

#[test]
fn bad_flags_get_a_usage_reason() {
    let out = sincfront(&["train", "--frontend", "fft"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: usage: "));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn busy_out_dir_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    std::fs::create_dir_all(&out_dir).unwrap();
    std::fs::write(out_dir.join(".sincfront.lock"), "1\n").unwrap();
    let out = sincfront(&["--out", s(&out_dir), "gen-corpus"]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error: locked: "));
}

/// Full-size front-end, tiny everything else, so only the first layer matters.
fn param_count_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "wide.toml",
        &TINY
            .replace("filters = 8\nlength = 31", "filters = 80\nlength = 251")
            .replace("sample_rate = 8000.0", "sample_rate = 16000.0"),
    )
}

#[test]
fn zero_epochs_writes_initial_checkpoint_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = param_count_config(dir.path());
    let corpus = dir.path().join("corpus");
    ok(&["--config", s(&cfg), "--out", s(&corpus), "gen-corpus"]);
    let manifest = corpus.join("manifest.jsonl");
    let mut counts = Vec::new();
    for fe in ["sinc", "conv"] {
        let out_dir = dir.path().join(fe);
        let out = ok(&[
            "--config",
            s(&cfg),
            "--out",
            s(&out_dir),
            "train",
            "--manifest",
            s(&manifest),
            "--frontend",
            fe,
            "--epochs",
            "0",
        ]);
        assert!(out_dir.join("model.ckpt").is_file());
        assert_eq!(
            std::fs::read_to_string(out_dir.join("train_log.csv")).unwrap(),
            "epoch,train_loss,heldout_fer,wall_s\n"
        );
        let summary = json(&out_dir.join("summary.json"));
        let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(printed, summary);
        assert_eq!(summary["frontend"], fe);
        assert_eq!(summary["steps"], 0);
        counts.push(summary["first_layer_params"].as_u64().unwrap());
        let echo = json(&out_dir.join("config.json"));
        assert_eq!(echo["network"]["frontend"]["kind"], fe);
        assert_eq!(echo["train"]["epochs"], 0);
    }
    // 2F versus F * L at F = 80, L = 251.
    assert_eq!(counts, vec![160, 20080]);
}

#[test]
fn class_count_mismatch_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_tiny(dir.path());
    let cfg = write_config(dir.path(), "three.toml", &TINY.replace("n_classes = 2", "n_classes = 3"));
    let out = sincfront(&["--config", s(&cfg), "--out", s(&dir.path().join("t")), "train", "--manifest", s(&manifest)]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error: config: "), "{}", stderr(&out));
}

#[test]
fn training_is_reproducible_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_tiny(dir.path());
    let cfg = dir.path().join("tiny.toml");
    for run in ["r1", "r2"] {
        ok(&[
            "--config",
            s(&cfg),
            "--out",
            s(&dir.path().join(run)),
            "train",
            "--manifest",
            s(&manifest),
            "--no-timing",
        ]);
    }
    for f in ["train_log.csv", "model.ckpt", "summary.json", "config.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("r1").join(f)).unwrap(),
            std::fs::read(dir.path().join("r2").join(f)).unwrap(),
            "{f}"
        );
    }
    let log = std::fs::read_to_string(dir.path().join("r1/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.toml", TINY);
    ok(&["--config", s(&cfg), "--seed", "11", "--out", s(&dir.path().join("a")), "gen-corpus"]);
    let echo = dir.path().join("a/config.json");
    ok(&["--config", s(&echo), "--out", s(&dir.path().join("b")), "gen-corpus"]);
    assert_eq!(
        std::fs::read(dir.path().join("a/manifest.jsonl")).unwrap(),
        std::fs::read(dir.path().join("b/manifest.jsonl")).unwrap()
    );
    assert_eq!(json(&echo)["corpus"]["seed"], 11);
}

fn train_zero(dir: &Path, frontend: &str) -> PathBuf {
    let manifest = dir.join("corpus/manifest.jsonl");
    if !manifest.exists() {
        gen_tiny(dir);
    }
    let out = dir.join(format!("train_{frontend}"));
    ok(&[
        "--config",
        s(&dir.join("tiny.toml")),
        "--out",
        s(&out),
        "train",
        "--manifest",
        s(&manifest),
        "--frontend",
        frontend,
        "--epochs",
        "0",
    ]);
    out.join("model.ckpt")
}

#[test]
fn fresh_sinc_export_matches_mel_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_zero(dir.path(), "sinc");
    let out = dir.path().join("filters");
    ok(&["--out", s(&out), "inspect-filters", "--checkpoint", s(&ckpt), "--n-points", "300"]);
    let export = json(&out.join("filters.json"));
    let init = mel_init_cutoffs(8, 8000.0).unwrap();
    let filters = export["filters"].as_array().unwrap();
    assert_eq!(filters.len(), 8);
    for (f, raw) in filters.iter().zip(&init) {
        let f1 = f["f1_hz"].as_f64().unwrap();
        let f2 = f["f2_hz"].as_f64().unwrap();
        assert!((f1 - raw.f1 * 8000.0).abs() < 1e-6);
        assert!((f2 - raw.f2 * 8000.0).abs() < 1e-6);
        assert_eq!(f["taps"].as_array().unwrap().len(), 31);
        assert_eq!(f["response"].as_array().unwrap().len(), 300);
    }
    let cumulative = std::fs::read_to_string(out.join("cumulative.csv")).unwrap();
    assert_eq!(cumulative.lines().count(), 1 + 300);
    let header = std::fs::read_to_string(out.join("filters.csv")).unwrap();
    assert!(header.starts_with("f1_abs_hz,f2_abs_hz,tap_0,"));
}

#[test]
fn conv_export_has_no_cutoff_columns() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_zero(dir.path(), "conv");
    let out = dir.path().join("filters");
    ok(&["--out", s(&out), "inspect-filters", "--checkpoint", s(&ckpt)]);
    let export = json(&out.join("filters.json"));
    assert_eq!(export["frontend"], "conv");
    let f0 = export["filters"][0].as_object().unwrap();
    assert!(!f0.contains_key("f1_hz") && !f0.contains_key("f2_hz"));
    assert_eq!(f0["response"].as_array().unwrap().len(), 1024);
    let csv = std::fs::read_to_string(out.join("filters.csv")).unwrap();
    assert!(csv.starts_with("tap_0,"));
    assert!(!csv.contains("hz"));
}

#[test]
fn corrupt_checkpoint_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, b"SFCKPT\0\0garbage").unwrap();
    let out = sincfront(&["--out", s(&dir.path().join("f")), "inspect-filters", "--checkpoint", s(&bad)]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error: checkpoint: "), "{}", stderr(&out));
}

/// A manifest whose speakers enrol and test on the very same audio.
fn self_trial_manifest(dir: &Path) -> PathBuf {
    let cfg = write_config(
        dir,
        "unseen.toml",
        &TINY
            .replace("n_classes = 2", "n_classes = 4\nclass_id_offset = 100")
            .replace("seed = 3", "seed = 9"),
    );
    let corpus = dir.join("unseen");
    ok(&["--config", s(&cfg), "--out", s(&corpus), "gen-corpus"]);
    let text = std::fs::read_to_string(corpus.join("manifest.jsonl")).unwrap();
    let mut lines = Vec::new();
    for line in text.lines() {
        let mut e: Value = serde_json::from_str(line).unwrap();
        if e["split"] == "train" && e["utterance_id"].as_str().unwrap().ends_with("_00") {
            lines.push(e.to_string());
            e["split"] = "test".into();
            e["utterance_id"] = format!("{}_again", e["utterance_id"].as_str().unwrap()).into();
            lines.push(e.to_string());
        }
    }
    let p = corpus.join("self.jsonl");
    std::fs::write(&p, lines.join("\n") + "\n").unwrap();
    p
}

#[test]
fn verify_on_identical_audio_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_zero(dir.path(), "sinc");
    let manifest = self_trial_manifest(dir.path());
    let out = dir.path().join("verify");
    let run = ok(&[
        "--config",
        s(&dir.path().join("tiny.toml")),
        "--out",
        s(&out),
        "verify",
        "--checkpoint",
        s(&ckpt),
        "--enroll",
        s(&manifest),
        "--trials",
        s(&manifest),
    ]);
    let report = json(&out.join("verify.json"));
    let keys: Vec<&str> = report.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(sorted, ["eer_pct", "n_genuine", "n_impostor", "threshold"]);
    assert_eq!(report["eer_pct"], 0.0);
    assert_eq!(report["n_genuine"], 4);
    assert_eq!(report["n_impostor"], 40);
    assert_eq!(serde_json::from_slice::<Value>(&run.stdout).unwrap(), report);

    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    let mut lines = scores.lines();
    assert_eq!(lines.next(), Some("score,is_genuine"));
    let rows: Vec<(f64, &str)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b)
        })
        .collect();
    assert_eq!(rows.len(), 44);
    for (score, g) in rows {
        assert!(g == "0" || g == "1");
        if g == "1" {
            assert!((score - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn verify_refuses_training_speakers() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_zero(dir.path(), "sinc");
    let manifest = dir.path().join("corpus/manifest.jsonl");
    let out = sincfront(&[
        "--config",
        s(&dir.path().join("tiny.toml")),
        "--out",
        s(&dir.path().join("v")),
        "verify",
        "--checkpoint",
        s(&ckpt),
        "--enroll",
        s(&manifest),
        "--trials",
        s(&manifest),
    ]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error: speaker-overlap: speakers [0, 1]"), "{err}");
}

#[test]
fn eval_reports_error_rates() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_zero(dir.path(), "conv");
    let out = dir.path().join("eval");
    ok(&[
        "--config",
        s(&dir.path().join("tiny.toml")),
        "--out",
        s(&out),
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--manifest",
        s(&dir.path().join("corpus/manifest.jsonl")),
    ]);
    let r = json(&out.join("eval.json"));
    assert_eq!(r["n_utterances"], 4);
    for k in ["fer_pct", "cer_pct"] {
        let v = r[k].as_f64().unwrap();
        assert!((0.0..=100.0).contains(&v));
    }
}
