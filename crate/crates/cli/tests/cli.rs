use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3

[synth]
members = 400
clusters = 4

[train]
epochs = 2
batch_size = 32
learning_rate = 0.01

[ranker]
epochs = 2

[eval]
pool_size = 40
"#;

fn linksage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linksage"))
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = linksage(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_export(path: &Path) -> HashMap<String, Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut f = l.split('\t');
            let node = f.next().unwrap().to_string();
            let _version = f.next().unwrap();
            let v = f.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
            (node, v)
        })
        .collect()
}

#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let c = ["--config", cfg.as_str(), "--workers", "2"];
    for sub in ["synth", "build-graph", "train", "infer-batch", "rank-train"] {
        ok(dir.path(), &[&c[..], &[sub]].concat());
    }
    let out = ok(dir.path(), &[&c[..], &["evaluate"]].concat());
    assert!(out.contains("overall AUC"), "{out}");
    for f in [
        "graph.tsv",
        "labels.tsv",
        "events.jsonl",
        "examples.tsv",
        "stats.txt",
        "model.ckpt",
        "train_report.txt",
        "train_loss.csv",
        "embeddings.tsv",
        "ranker.ckpt",
        "metrics/recall.csv",
        "metrics/segments.csv",
        "metrics/overall.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let seg = std::fs::read_to_string(dir.path().join("metrics/segments.csv")).unwrap();
    assert!(seg.starts_with("segment,n,auc,recall_at_k\noverall,"), "{seg}");
    assert!(seg.contains("cold-start"), "{seg}");
}

#[test]
fn seeded_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let cfg = small_config(dir);
        ok(dir, &["--config", &cfg, "--seed", "9", "synth"]);
        ok(dir, &["--config", &cfg, "--seed", "9", "--workers", "1", "train", "--epochs", "1"]);
    }
    for f in ["graph.tsv", "labels.tsv", "events.jsonl", "model.ckpt", "train_loss.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn nearline_export_matches_batch_inference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(dir.path(), &["--config", &cfg, "synth"]);
    ok(dir.path(), &["--config", &cfg, "train", "--epochs", "1"]);
    ok(dir.path(), &["--config", &cfg, "infer-batch"]);
    ok(
        dir.path(),
        &["--config", &cfg, "--workers", "4", "serve-nearline", "--capacity", "100000"],
    );
    let batch = read_export(&dir.path().join("embeddings.tsv"));
    let nearline: HashMap<_, _> = read_export(&dir.path().join("nearline_embeddings.tsv"))
        .into_iter()
        .filter(|(k, _)| k.starts_with("Member:") || k.starts_with("Job:"))
        .collect();
    assert!(!batch.is_empty());
    assert_eq!(batch.len(), nearline.len());
    let mut worst = 0f64;
    for (k, v) in &batch {
        let w = nearline.get(k).unwrap_or_else(|| panic!("{k} missing from the nearline export"));
        assert_eq!(v.len(), w.len());
        for (x, y) in v.iter().zip(w) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst <= 1e-6, "max abs diff {worst}");
}

#[test]
fn missing_label_file_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(dir.path(), &["--config", &cfg, "synth"]);
    let labels = dir.path().join("labels.tsv");
    std::fs::remove_file(&labels).unwrap();
    let out = linksage(dir.path(), &["--config", &cfg, "train"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&*labels.to_string_lossy()), "{err}");
}

#[test]
fn malformed_label_file_names_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(dir.path(), &["--config", &cfg, "synth"]);
    let labels = dir.path().join("labels.tsv");
    let mut text = std::fs::read_to_string(&labels).unwrap();
    text.push_str("not a label line\n");
    let line = text.lines().count();
    std::fs::write(&labels, text).unwrap();
    let out = linksage(dir.path(), &["--config", &cfg, "train"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("labels.tsv") && err.contains(&format!("line {line}")), "{err}");
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(dir.path(), &["--config", &cfg, "synth"]);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL.replace("learning_rate = 0.01", "learning_rate = 1e150\noptimizer = \"sgd\""))
        .unwrap();
    let out = linksage(dir.path(), &["--config", bad.to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[sampler]\nfanuot = [3, 2]\n").unwrap();
    let out = linksage(dir.path(), &["--config", path.to_str().unwrap(), "synth"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fanuot"));
}

#[test]
fn usage_errors_exit_1_and_help_lists_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(linksage(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(linksage(dir.path(), &["--workers", "0", "synth"]).status.code(), Some(1));
    let help = ok(dir.path(), &["--help"]);
    for flag in ["--config", "--seed", "--workers", "--data-dir", "--verbose"] {
        assert!(help.contains(flag), "{flag} not in help");
    }
    for sub in ["synth", "build-graph", "train", "infer-batch", "serve-nearline", "rank-train", "evaluate", "bench"] {
        assert!(help.contains(sub), "{sub} not in help");
    }
    let help = ok(dir.path(), &["train", "--help"]);
    for flag in ["--decoder", "--epochs", "--batch-size", "--learning-rate", "--cutoff", "--seed"] {
        assert!(help.contains(flag), "{flag} not in train help");
    }
}

#[test]
fn bench_reports_throughput() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(dir.path(), &["--config", &cfg, "synth"]);
    let out = ok(dir.path(), &["--config", &cfg, "bench", "--nodes", "200"]);
    for key in ["sampling_nodes_per_sec", "encoding_nodes_per_sec", "nearline_events_per_sec"] {
        assert!(out.contains(key), "{out}");
    }
    assert!(dir.path().join("metrics/bench.txt").exists());
}
