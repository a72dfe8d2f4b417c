use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lachesis::io::{parse_traces, traces_to_string};
use lachesis_core::synth::{self, SynthConfig};
use proptest::prelude::*;
use tempfile::TempDir;

fn lachesis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lachesis"))
        .args(args)
        .env_remove("LACHESIS_SEED")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_synth(dir: &Path, n_bugs: usize, seed: u64) -> PathBuf {
    let file = synth::generate(&SynthConfig {
        n_bugs,
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let path = dir.join(format!("traces-{seed}.json"));
    fs::write(&path, traces_to_string(&file)).unwrap();
    path
}

fn write_config(dir: &Path, scheme: &str) -> PathBuf {
    let path = dir.join(format!("config-{scheme}.json"));
    let config = format!(
        r#"{{
  "scheme": "{scheme}",
  "representation": "graph",
  "hyperparameters": {{"model": "gcn", "layers": 2, "hidden_dim": 8, "batch": 8, "dropout": 0.3, "epochs": 4, "learning_rate": 0.01}},
  "folds": 3,
  "seed": 5
}}"#
    );
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn help_lists_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        ("validate", &["--traces"]),
        ("synth", &["--config", "--out", "--seed"]),
        (
            "train",
            &[
                "--config",
                "--traces",
                "--out",
                "--seed",
                "--model",
                "--scheme",
                "--threshold",
                "--epoch-selection",
                "--jobs",
            ],
        ),
        ("eval", &["--checkpoint", "--traces", "--threshold", "--out"]),
        ("baseline", &["--traces", "--threshold", "--out"]),
        ("gradcheck", &["--model", "--seed"]),
        (
            "predict",
            &["--checkpoint", "--traces", "--prefix-steps", "--threshold", "--out"],
        ),
    ];
    for (cmd, flags) in expected {
        let out = lachesis(&[cmd, "--help"]);
        assert!(out.status.success(), "{cmd}");
        let help = text(&out.stdout);
        for flag in *flags {
            assert!(help.contains(flag), "`{cmd} --help` does not mention {flag}:\n{help}");
        }
    }
}

#[test]
fn usage_errors_exit_two() {
    let out = lachesis(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("Usage"));
    assert_eq!(lachesis(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(lachesis(&[]).status.code(), Some(2));
}

#[test]
fn validate_and_baseline_on_generated_traces() {
    let dir = TempDir::new().unwrap();
    let traces = write_synth(dir.path(), 40, 1);
    let out = lachesis(&["validate", p(&traces)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("40 bugs OK"));

    let out_dir = dir.path().join("base");
    let out = lachesis(&[
        "baseline",
        "--traces",
        p(&traces),
        "--threshold",
        "0.5",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(
        stdout.contains("Confidence") && stdout.contains("All-positive"),
        "{stdout}"
    );
    assert!(out_dir.join("baseline.json").exists() && out_dir.join("baseline.csv").exists());
}

#[test]
fn malformed_traces_exit_one_naming_the_bug() {
    let dir = TempDir::new().unwrap();
    let traces = write_synth(dir.path(), 5, 2);
    let broken = fs::read_to_string(&traces)
        .unwrap()
        .replacen("\"function\": 3", "\"function\": 9", 1);
    let path = dir.path().join("broken.json");
    fs::write(&path, broken).unwrap();
    let out = lachesis(&["validate", p(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("synth-") && err.contains("function"), "{err}");
    assert!(out.stdout.is_empty());

    assert_eq!(lachesis(&["validate", "/no/such/file.json"]).status.code(), Some(1));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let traces = write_synth(dir.path(), 10, 3);
    let out = lachesis(&[
        "train",
        "--model",
        "lstm",
        "--scheme",
        "s",
        "--traces",
        p(&traces),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let config = write_config(dir.path(), "f");
    let out = lachesis(&[
        "train",
        "--config",
        p(&config),
        "--scheme",
        "fa",
        "--traces",
        p(&traces),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = lachesis(&["baseline", "--traces", p(&traces), "--threshold", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"scheme\": \"f\"}").unwrap();
    let out = lachesis(&[
        "train",
        "--config",
        p(&bad),
        "--traces",
        p(&traces),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_honours_seed_flag_and_environment() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("synth.json");
    fs::write(
        &config,
        r#"{"n_bugs": 12, "positive_fraction": 0.6, "R": 4, "N": 6, "symbols_per_bug": 5, "convergence": 0.9, "noise": 0.1}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        lachesis(&["synth", "--config", p(&config), "--out", p(&a), "--seed", "17"])
            .status
            .success()
    );
    let out = Command::new(env!("CARGO_BIN_EXE_lachesis"))
        .args(["synth", "--config", p(&config), "--out", p(&b)])
        .env("LACHESIS_SEED", "17")
        .output()
        .unwrap();
    assert!(out.status.success());
    let a = fs::read(a.join("traces.json")).unwrap();
    assert_eq!(a, fs::read(b.join("traces.json")).unwrap());
    assert!(
        lachesis(&["validate", p(&dir.path().join("b/traces.json"))])
            .status
            .success()
    );
}

#[test]
fn train_eval_and_prefix_predict() {
    let dir = TempDir::new().unwrap();
    let traces = write_synth(dir.path(), 45, 4);
    let config = write_config(dir.path(), "fa");
    let run = dir.path().join("run");
    let out = lachesis(&[
        "train",
        "--config",
        p(&config),
        "--traces",
        p(&traces),
        "--out",
        p(&run),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for f in ["metrics.json", "metrics.csv", "roc.csv", "checkpoint.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 + 2);

    let parallel = dir.path().join("parallel");
    let out = lachesis(&[
        "train",
        "--config",
        p(&config),
        "--traces",
        p(&traces),
        "--out",
        p(&parallel),
        "--jobs",
        "3",
    ]);
    assert!(out.status.success());
    assert_eq!(
        fs::read(run.join("metrics.json")).unwrap(),
        fs::read(parallel.join("metrics.json")).unwrap()
    );
    assert_eq!(
        fs::read(run.join("checkpoint.json")).unwrap(),
        fs::read(parallel.join("checkpoint.json")).unwrap()
    );

    let ckpt = run.join("checkpoint.json");
    let eval = dir.path().join("eval");
    let out = lachesis(&[
        "eval",
        "--checkpoint",
        p(&ckpt),
        "--traces",
        p(&traces),
        "--out",
        p(&eval),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(fs::read_to_string(eval.join("scores.csv")).unwrap().lines().count(), 46);

    // prefix mode must not read answers: scrambling them leaves every score unchanged
    let pred_a = dir.path().join("pred-a");
    let out = lachesis(&[
        "predict",
        "--checkpoint",
        p(&ckpt),
        "--traces",
        p(&traces),
        "--prefix-steps",
        "5",
        "--out",
        p(&pred_a),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let mut file = parse_traces(&fs::read_to_string(&traces).unwrap()).unwrap();
    for (i, bug) in file.bugs.iter_mut().enumerate() {
        for (r, run) in bug.runs.iter_mut().enumerate() {
            run.answer = if (i + r) % 3 == 0 {
                vec![]
            } else {
                vec![format!("other.Pkg.m{i}_{r}()"), bug.ground_truth.clone()]
            };
        }
    }
    let scrambled = dir.path().join("scrambled.json");
    fs::write(&scrambled, traces_to_string(&file)).unwrap();
    let pred_b = dir.path().join("pred-b");
    let out = lachesis(&[
        "predict",
        "--checkpoint",
        p(&ckpt),
        "--traces",
        p(&scrambled),
        "--prefix-steps",
        "5",
        "--out",
        p(&pred_b),
    ]);
    assert!(out.status.success());
    let scores = |dir: &Path| -> Vec<String> {
        fs::read_to_string(dir.join("predictions.csv"))
            .unwrap()
            .lines()
            .map(|l| l.split(',').take(3).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(scores(&pred_a).len(), 46);
    assert_eq!(scores(&pred_a), scores(&pred_b));

    let out = lachesis(&[
        "predict",
        "--checkpoint",
        p(&ckpt),
        "--traces",
        p(&traces),
        "--prefix-steps",
        "11",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn prefix_mode_rejects_answer_schemes() {
    let dir = TempDir::new().unwrap();
    let traces = write_synth(dir.path(), 20, 5);
    let config = write_config(dir.path(), "faa");
    let run = dir.path().join("run");
    assert!(
        lachesis(&[
            "train",
            "--config",
            p(&config),
            "--traces",
            p(&traces),
            "--out",
            p(&run)
        ])
        .status
        .success()
    );
    let out = lachesis(&[
        "predict",
        "--checkpoint",
        p(&run.join("checkpoint.json")),
        "--traces",
        p(&traces),
        "--prefix-steps",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("F+A+A"));
}

#[test]
fn gradcheck_passes_for_both_models() {
    for model in ["lstm", "gcn"] {
        let out = lachesis(&["gradcheck", "--model", model, "--seed", "1"]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        assert_eq!(text(&out.stdout).lines().count(), 6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ingest_after_serialize_is_identity(seed in any::<u64>(), n_bugs in 1..12usize, runs in 1..6usize, max_steps in 2..9usize) {
        let file = synth::generate(&SynthConfig { n_bugs, runs, max_steps, seed, ..SynthConfig::default() }).unwrap();
        let text = traces_to_string(&file);
        let back = parse_traces(&text).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(traces_to_string(&back), text);
    }
}
