use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stylodetect::corpus::{corpus_stats, save_corpus, Klass};
use stylodetect::eval::text_corpus;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stylodetect"));
    for (k, _) in std::env::vars() {
        if k.starts_with("STYLO_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("spawn stylodetect")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn corpus(dir: &Path, topics: usize) -> PathBuf {
    let p = dir.join("corpus.jsonl");
    save_corpus(&text_corpus(topics, 11), &p).unwrap();
    p
}

fn run_json(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap()
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
    let help = stdout(&o);
    for flag in [
        "--config", "--out", "--jobs", "--cache-dir", "--annotations", "--lexicons",
        "--impute-ai-feedback", "--cached-only", "--grammar", "--chat", "--embedding", "--lm",
        "--embedding-dim",
    ] {
        assert!(help.contains(flag), "{flag} missing from --help");
    }
    for cmd in ["stats", "featurize", "train", "evaluate", "ablate", "predict", "hist"] {
        assert!(help.contains(cmd), "{cmd} missing from --help");
        let o = run(&[cmd, "--help"], dir.path());
        assert_eq!(code(&o), 0, "{cmd} --help");
    }
    let o = run(&["train", "--help"], dir.path());
    for flag in ["--corpus", "--seed", "--task", "--classifier", "--selection", "--shared-split-seed", "--name"] {
        assert!(stdout(&o).contains(flag), "{flag} missing from train --help");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 1);
    let c = c.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["frobnicate"],
        vec!["stats", "--no-such-flag"],
        vec!["stats", "missing.jsonl"],
        vec!["stats"],
        vec!["evaluate", "--corpus", c, "--task", "basic_generation"],
        vec!["evaluate", "--corpus", c, "--task", "nonsense", "--seed", "1"],
        vec!["train", "--corpus", c, "--seed", "1", "--classifier", "svm", "--task", "basic_generation"],
        vec!["evaluate", "--corpus", c, "--seed", "1", "--task", "basic_generation", "--selection", "Everything"],
        vec!["evaluate", "--corpus", c, "--seed", "1", "--task", "basic_generation", "--chat", "live"],
        vec!["hist", "--corpus", c, "--feature", "no_such_feature"],
        vec!["stats", c, "--jobs", "0"],
        vec!["stats", c, "--grammar", "sometimes"],
    ];
    for args in cases {
        let o = run(&args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": \"x\"}\n").unwrap();
    let o = run(&["stats", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("bad.jsonl"), "{}", stderr(&o));

    // AI feedback without a chat answer or imputation
    let c = corpus(dir.path(), 1);
    let o = run(
        &["featurize", "--corpus", c.to_str().unwrap(), "--selection", "AIFeedback_new"],
        dir.path(),
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn stats_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let o = run(&["stats", c.to_str().unwrap(), "--out", "res"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut want = Vec::new();
    corpus_stats(&text_corpus(2, 11)).unwrap().write_csv(&mut want).unwrap();
    assert_eq!(o.stdout, want);
    let out = dir.path().join("res");
    assert_eq!(std::fs::read(out.join("stats.csv")).unwrap(), want);
    let run = run_json(&out);
    assert_eq!(run["command"], "stats");
    assert_eq!(run["corpus"]["samples"], 100);
    assert_eq!(run["corpus"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn precedence_is_flag_then_config_then_env() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, format!("seed = 5\ncorpus = {:?}\nout = \"from_config\"\n", c)).unwrap();
    let base = [
        "evaluate", "--task", "basic_generation", "--classifier", "rf", "--selection",
        "Readability_traditional",
    ];
    let with = |extra: &[&str], env: &[(&str, &str)]| {
        let mut cmd = bin();
        cmd.args(base).args(extra).current_dir(dir.path());
        for (k, v) in env {
            cmd.env(k, v);
        }
        let o = cmd.output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    with(&["--config", cfg.to_str().unwrap(), "--seed", "9"], &[("STYLO_SEED", "3")]);
    assert_eq!(run_json(&dir.path().join("from_config"))["params"]["seed"], 9);
    with(&["--config", cfg.to_str().unwrap()], &[("STYLO_SEED", "3"), ("STYLO_OUT", "from_env")]);
    assert_eq!(run_json(&dir.path().join("from_config"))["params"]["seed"], 5);
    with(&["--corpus", c.to_str().unwrap()], &[("STYLO_SEED", "3"), ("STYLO_OUT", "from_env")]);
    assert_eq!(run_json(&dir.path().join("from_env"))["params"]["seed"], 3);
}

#[test]
fn evaluation_is_reproducible_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let args = |out: &str, jobs: &str| -> Vec<String> {
        [
            "evaluate", "--corpus", c.to_str().unwrap(), "--task", "advanced_rephrase", "--seed", "4",
            "--selection", "Document_traditional+new", "--out", out, "--jobs", jobs,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    let go = |out: &str, jobs: &str| {
        let o = bin().args(args(out, jobs)).current_dir(dir.path()).output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        o
    };
    let first = go("a", "1");
    let table = stdout(&first);
    assert!(table.contains("Document_traditional+new"), "{table}");
    let read = |out: &str, f: &str| std::fs::read(dir.path().join(out).join(f)).unwrap();
    let (report, summary, run_a) = (read("a", "report.csv"), read("a", "summary.csv"), read("a", "run.json"));
    assert_eq!(String::from_utf8_lossy(&report).lines().count(), 1 + 3 * 5);

    std::fs::remove_dir_all(dir.path().join("a")).unwrap();
    go("a", "1");
    assert_eq!(read("a", "report.csv"), report);
    assert_eq!(read("a", "summary.csv"), summary);
    assert_eq!(read("a", "run.json"), run_a);

    go("b", "2");
    assert_eq!(read("b", "report.csv"), report);
    assert_eq!(read("b", "table.txt"), read("a", "table.txt"));

    let run = run_json(&dir.path().join("a"));
    let split = run["params"]["split_seeds"]["advanced_rephrase"].as_u64().unwrap();
    assert_ne!(split, 4, "per-task split seed");
    assert_eq!(run["providers"]["perplexity"], "builtin-ngram");
    assert!(run["lexicons"].as_object().is_some_and(|m| !m.is_empty()));
    assert!(run["schema"].is_string());
}

#[test]
fn shared_split_seed_uses_the_base_seed() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let o = run(
        &[
            "evaluate", "--corpus", c.to_str().unwrap(), "--task", "basic_generation", "--seed", "4",
            "--classifier", "gbt", "--selection", "Readability_traditional", "--shared-split-seed",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(run_json(&dir.path().join("out"))["params"]["split_seeds"]["basic_generation"], 4);
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 3);
    let o = run(
        &[
            "train", "--corpus", c.to_str().unwrap(), "--task", "basic_generation", "--classifier", "rf",
            "--seed", "2", "--impute-ai-feedback", "--name", "rf_all",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in ["rf_all.json", "rf_all.tfidf.json", "rf_all.lm.json", "rf_all.features.csv"] {
        assert!(out.join(f).is_file(), "{f} not written");
    }
    let model: Value = serde_json::from_str(&std::fs::read_to_string(out.join("rf_all.json")).unwrap()).unwrap();
    assert_eq!(model["selection"], "All_traditional+new");
    assert_eq!(model["classifier"]["params"]["kind"], "rf");

    let samples = text_corpus(1, 99);
    for (klass, want) in [(Klass::Human, "human"), (Klass::AiGenerated, "AI")] {
        let s = samples.iter().find(|s| s.klass == klass && s.variant.as_str() != "advanced").unwrap();
        let file = dir.path().join(format!("{want}.txt"));
        std::fs::write(&file, &s.body).unwrap();
        let o = run(
            &[
                "predict", file.to_str().unwrap(), "--model", out.join("rf_all.json").to_str().unwrap(),
                "--impute-ai-feedback", "--title", &s.topic_title,
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let text = stdout(&o);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("verdict: {want}"), "{text}");
        let p: f64 = lines[1].strip_prefix("probability_ai: ").unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        // one row per scalar feature of the selection
        let rows: Vec<&str> = lines[3..].to_vec();
        assert_eq!(rows.len(), 35, "{text}");
        for row in &rows {
            let cols: Vec<&str> = row.split_whitespace().collect();
            assert_eq!(cols.len(), 4, "{row}");
            for pct in &cols[2..] {
                let v: f64 = pct.parse().unwrap();
                assert!((0.0..=100.0).contains(&v), "{row}");
            }
        }
        assert!(rows.iter().any(|r| r.starts_with("PPL_mean ")));
        assert_eq!(run_json(&out)["params"]["verdict"], want);
    }

    // a model from another feature schema is refused
    std::fs::write(dir.path().join("embedding.jsonl"), "").unwrap();
    let o = run(
        &[
            "predict", dir.path().join("human.txt").to_str().unwrap(), "--model",
            out.join("rf_all.json").to_str().unwrap(), "--impute-ai-feedback", "--embedding", "cached_only",
            "--embedding-dim", "8", "--cache-dir", dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("feature schema"), "{}", stderr(&o));
}

#[test]
fn histogram_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let o = run(
        &["hist", "--corpus", c.to_str().unwrap(), "--feature", "quotation_count", "--bins", "3"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "feature,bin_low,bin_high,class,count,fraction");
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert_eq!(std::fs::read_to_string(dir.path().join("out/hist_quotation_count.csv")).unwrap(), text);
}

#[test]
fn featurize_writes_the_selected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 1);
    let o = run(
        &["featurize", "--corpus", c.to_str().unwrap(), "--task", "basic_rephrase", "--selection", "Readability_traditional"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/features.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("id,label,fleschReadingEase,fleschKincaidGradeLevel"));
    assert_eq!(lines.count(), 20);
}

#[test]
fn ablate_emits_the_full_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let o = run(
        &[
            "ablate", "--corpus", c.to_str().unwrap(), "--task", "basic_generation", "--seed", "7",
            "--impute-ai-feedback",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 14 * 3 * 5);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 14 * 3);
    let table = stdout(&o);
    for sel in ["Perplexity_traditional", "ErrorBased_new", "AIFeedback_new", "All_traditional+new"] {
        assert!(table.contains(sel), "{sel} missing:\n{table}");
    }
    assert!(!table.contains("ErrorBased_traditional"));
}
