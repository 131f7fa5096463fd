use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[stream]
d1 = 8
k = 1
extra_channels = 1
q = 3
segments = 500

[model]
d1 = 8
d2 = 4
q = 3
h1 = 5
h2 = 5
lr = 0.01
max_epoch = 10
checkpoint_every = 5
batch_size = 32

[update]
count_channels = 3
buffer_len = 50
update_epochs = 5
"#;

struct Workdir {
    dir: tempfile::TempDir,
}

impl Workdir {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
        Workdir { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Runs the binary with exactly `args`.
    fn bare(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_clad"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs the binary with the small run configuration.
    fn clad(&self, args: &[&str]) -> Output {
        let mut all = vec!["--config", "run.toml"];
        all.extend_from_slice(args);
        self.bare(&all)
    }

    fn ok_bare(&self, args: &[&str]) -> String {
        let out = self.bare(args);
        assert!(
            out.status.success(),
            "clad {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.clad(args);
        assert!(
            out.status.success(),
            "clad {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn trained(&self) {
        self.ok(&["--seed", "3", "gen", "--out", "data.jsonl"]);
        self.ok(&["train", "--data", "data.jsonl", "--out", "model.json"]);
    }
}

fn flagged(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.split('\t').nth(5) == Some("1"))
        .map(|l| l.split('\t').next().unwrap().to_string())
        .collect()
}

#[test]
fn generation_is_reproducible() {
    let w = Workdir::new();
    w.ok(&["--seed", "7", "gen", "--out", "a.jsonl"]);
    w.ok(&["--seed", "7", "gen", "--out", "b.jsonl"]);
    w.ok(&["--seed", "8", "gen", "--out", "c.jsonl"]);
    let read = |n: &str| std::fs::read(w.path(n)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_ne!(read("a.jsonl"), read("c.jsonl"));
}

#[test]
fn gen_writes_to_stdout_by_default() {
    let w = Workdir::new();
    let text = w.ok(&["gen", "--segments", "20"]);
    assert_eq!(text.lines().count(), 21, "header plus one line per segment");
}

#[test]
fn pruned_detection_flags_the_same_segments() {
    let w = Workdir::new();
    w.trained();
    w.ok(&["detect", "--data", "data.jsonl", "--model", "model.json", "--out", "full.tsv"]);
    w.ok(&["detect", "--ados", "--data", "data.jsonl", "--model", "model.json", "--out", "ados.tsv"]);
    assert_eq!(flagged(&w.path("full.tsv")), flagged(&w.path("ados.tsv")));
    let header = std::fs::read_to_string(w.path("ados.tsv")).unwrap();
    assert!(header.starts_with("id\tre_i\tre_a\tre_ia\tlabel\tanomaly\tfilter_path"));
}

#[test]
fn frozen_stream_matches_detect() {
    let w = Workdir::new();
    w.trained();
    w.ok(&["detect", "--data", "data.jsonl", "--model", "model.json", "--out", "batch.tsv"]);
    w.ok(&["stream", "--no-update", "--data", "data.jsonl", "--model", "model.json", "--out", "online.tsv"]);
    let batch = std::fs::read_to_string(w.path("batch.tsv")).unwrap();
    let online = std::fs::read_to_string(w.path("online.tsv")).unwrap();
    assert_eq!(batch, online);
}

#[test]
fn stream_with_updates_writes_a_log() {
    let w = Workdir::new();
    w.trained();
    w.ok(&[
        "stream", "--data", "data.jsonl", "--model", "model.json", "--out", "s.tsv", "--update-log", "u.jsonl",
    ]);
    let log = std::fs::read_to_string(w.path("u.jsonl")).unwrap();
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("sim").is_some());
    }
}

#[test]
fn eval_reports_auroc_and_curve() {
    let w = Workdir::new();
    std::fs::write(
        w.path("perfect.tsv"),
        "id\tre_i\tre_a\tre_ia\tlabel\tanomaly\tfilter_path\n\
         0\t0.1\t0.1\t0.1\t0\t0\t-\n\
         1\t0.2\t0.1\t0.2\t0\t0\t-\n\
         2\t0.9\t0.5\t0.8\t1\t1\t-\n",
    )
    .unwrap();
    let out = w.ok(&["eval", "--scores", "perfect.tsv", "--curve", "roc.tsv"]);
    assert_eq!(out.trim(), "auroc 1");
    let curve = std::fs::read_to_string(w.path("roc.tsv")).unwrap();
    assert!(curve.starts_with("fpr\ttpr"));
}

#[test]
fn bench_reports_filter_counts() {
    let w = Workdir::new();
    w.trained();
    let out = w.ok(&["bench", "--data", "data.jsonl", "--model", "model.json", "--repeats", "1"]);
    for key in ["fp_total", "exact_js_calls", "count_exact"] {
        assert!(out.lines().any(|l| l.starts_with(key)), "missing {key} in\n{out}");
    }
}

#[test]
fn print_config_round_trips() {
    let w = Workdir::new();
    let text = w.ok(&["--preset", "ted", "--print-config"]);
    std::fs::write(w.path("printed.toml"), &text).unwrap();
    let again = w.ok_bare(&["--config", "printed.toml", "--print-config"]);
    assert_eq!(text, again);
    assert!(text.contains("omega = 0.9"));
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let w = Workdir::new();
    // Usage and validation errors.
    assert_eq!(w.clad(&["detect"]).status.code(), Some(1));
    assert_eq!(w.clad(&["--preset", "nope", "gen"]).status.code(), Some(1));
    std::fs::write(w.path("bad.toml"), "[model]\nomega = 2.0\n").unwrap();
    assert_eq!(w.bare(&["--config", "bad.toml", "gen"]).status.code(), Some(1));
    assert_eq!(w.bare(&["--config", "absent.toml", "gen"]).status.code(), Some(2));
    // Missing files.
    let missing = w.clad(&["detect", "--data", "nope.jsonl", "--model", "nope.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());
    // Help is not an error.
    assert_eq!(w.clad(&["--help"]).status.code(), Some(0));
}
