//! End-to-end tests of the `tagger` binary: exit codes, output formats and
//! byte-determinism of every workflow.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tagger() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tagger"))
}

fn run(args: &[&str]) -> Output {
    tagger().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// A small deterministic corpus: the UPOS is a function of the final
/// character, so even a briefly trained word-mode model fits it.
fn write_corpus(path: &Path, sentences: usize, seed_shift: usize) {
    let mut text = String::new();
    for s in 0..sentences {
        text.push_str(&format!("# sent_id = {}\n", s + 1));
        let len = 3 + (s + seed_shift) % 3;
        for i in 0..len {
            let kind = (s * 7 + i * 3 + seed_shift) % 2;
            let (form, upos) = if kind == 0 {
                (format!("noma{}", (s + i) % 5), "NOUN")
            } else {
                (format!("verbi{}", (s + i) % 5), "VERB")
            };
            let head = if i == 0 { 0 } else { 1 };
            let deprel = if i == 0 { "root" } else { "dep" };
            text.push_str(&format!(
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_\n",
                i + 1,
                form,
                upos,
                head,
                deprel
            ));
        }
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

struct Trained {
    _dir: tempfile::TempDir,
    model: PathBuf,
    train: PathBuf,
    dev: PathBuf,
}

fn train_small(task: &str) -> Trained {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.conllu");
    let dev = dir.path().join("dev.conllu");
    let model = dir.path().join("model.bin");
    write_corpus(&train, 12, 0);
    write_corpus(&dev, 4, 1);
    let out = run(&[
        "train",
        "--task",
        task,
        "--mode",
        "w",
        "--train",
        train.to_str().unwrap(),
        "--dev",
        dev.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--max-epochs",
        "2",
        "--patience",
        "2",
        "--seed",
        "3",
    ]);
    assert_eq!(
        code(&out),
        0,
        "train failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).starts_with("epoch\ttrain_loss\tdev_acc\n"));
    assert!(stdout(&out).contains("best_epoch\t"));
    Trained {
        _dir: dir,
        model,
        train,
        dev,
    }
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = run(&["eval", "--model", "m.bin"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.to_lowercase().contains("usage") || err.contains("--gold"),
        "{}",
        err
    );
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_model_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.conllu");
    write_corpus(&gold, 2, 0);
    let out = run(&[
        "eval",
        "--model",
        dir.path().join("nope.bin").to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.bin"));
}

#[test]
fn malformed_conllu_names_the_line() {
    let t = train_small("pos");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conllu");
    std::fs::write(&bad, "1\tonly\tthree\n").unwrap();
    let out = run(&[
        "eval",
        "--model",
        t.model.to_str().unwrap(),
        "--gold",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1"), "{}", err);
    assert!(err.contains("bad.conllu"), "{}", err);
}

#[test]
fn eval_prints_accuracy_line() {
    let t = train_small("pos");
    let out = run(&[
        "eval",
        "--model",
        t.model.to_str().unwrap(),
        "--gold",
        t.train.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(
        text.starts_with("accuracy\t0.") || text.starts_with("accuracy\t1."),
        "unexpected stdout {:?}",
        text
    );
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn eval_runs_are_byte_identical() {
    let t = train_small("pos");
    let args = [
        "eval",
        "--model",
        t.model.to_str().unwrap(),
        "--gold",
        t.dev.to_str().unwrap(),
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn train_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.conllu");
    let dev = dir.path().join("dev.conllu");
    write_corpus(&train, 10, 0);
    write_corpus(&dev, 3, 1);
    let m1 = dir.path().join("m1.bin");
    let m2 = dir.path().join("m2.bin");
    let mut outs = Vec::new();
    for model in [&m1, &m2] {
        let out = run(&[
            "train",
            "--task",
            "pos",
            "--mode",
            "w",
            "--train",
            train.to_str().unwrap(),
            "--dev",
            dev.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
            "--max-epochs",
            "1",
            "--patience",
            "1",
            "--seed",
            "9",
        ]);
        assert_eq!(code(&out), 0);
        outs.push(out.stdout);
    }
    assert_eq!(outs[0], outs[1], "train stdout differs");
    assert_eq!(
        std::fs::read(&m1).unwrap(),
        std::fs::read(&m2).unwrap(),
        "model files differ"
    );
}

#[test]
fn tag_writes_predictions_into_upos() {
    let t = train_small("pos");
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("tagged.conllu");
    let out = run(&[
        "tag",
        "--model",
        t.model.to_str().unwrap(),
        "--input",
        t.dev.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let original = std::fs::read_to_string(&t.dev).unwrap();
    let tagged = std::fs::read_to_string(&output).unwrap();
    // Input untouched.
    assert_eq!(original, std::fs::read_to_string(&t.dev).unwrap());
    // Same token structure, only UPOS may differ, tags are from training.
    for (orig, new) in original.lines().zip(tagged.lines()) {
        if orig.is_empty() || orig.starts_with('#') {
            assert_eq!(orig, new);
            continue;
        }
        let o: Vec<&str> = orig.split('\t').collect();
        let n: Vec<&str> = new.split('\t').collect();
        assert_eq!(o.len(), n.len());
        for c in [0usize, 1, 2, 4, 5, 6, 7, 8, 9] {
            assert_eq!(o[c], n[c], "column {} changed", c);
        }
        assert!(
            ["NOUN", "VERB"].contains(&n[3]),
            "tag {} outside tag set",
            n[3]
        );
    }

    // Idempotence: tagging the tagged file reproduces it.
    let output2 = dir.path().join("tagged2.conllu");
    let out = run(&[
        "tag",
        "--model",
        t.model.to_str().unwrap(),
        "--input",
        output.to_str().unwrap(),
        "--output",
        output2.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(tagged, std::fs::read_to_string(&output2).unwrap());
}

#[test]
fn stag_predictions_land_in_misc() {
    let t = train_small("stag");
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("tagged.conllu");
    let out = run(&[
        "tag",
        "--model",
        t.model.to_str().unwrap(),
        "--input",
        t.dev.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let tagged = std::fs::read_to_string(&output).unwrap();
    for line in tagged.lines() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        assert!(cols[9].contains("Stag="), "MISC without Stag: {}", line);
        // UPOS column is untouched by a stag model.
        assert!(["NOUN", "VERB"].contains(&cols[3]), "{}", line);
    }
}

#[test]
fn corrupt_prob_zero_preserves_forms() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.conllu");
    let output = dir.path().join("out.conllu");
    write_corpus(&input, 5, 0);
    let out = run(&[
        "corrupt",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
        "--op",
        "insert",
        "--prob",
        "0",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(&input).unwrap(),
        std::fs::read(&output).unwrap(),
        "prob 0 must copy the file byte for byte"
    );
}

#[test]
fn corrupt_prob_one_changes_long_forms_only() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.conllu");
    let output = dir.path().join("out.conllu");
    std::fs::write(
        &input,
        "1\tab\t_\tX\t_\t_\t0\troot\t_\t_\n2\tabcdef\t_\tX\t_\t_\t1\tdep\t_\t_\n\n",
    )
    .unwrap();
    let out = run(&[
        "corrupt",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
        "--op",
        "delete",
        "--prob",
        "1",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&output).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0].split('\t').nth(1), Some("ab"));
    let corrupted = lines[1].split('\t').nth(1).unwrap();
    assert_eq!(corrupted.chars().count(), 5);
    assert_ne!(corrupted, "abcdef");
}

#[test]
fn corrupt_rejects_bad_probability() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.conllu");
    write_corpus(&input, 2, 0);
    let out = run(&[
        "corrupt",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().join("out.conllu").to_str().unwrap(),
        "--op",
        "insert",
        "--prob",
        "1.5",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn robustness_emits_thirteen_numbers() {
    let t = train_small("pos");
    let args = [
        "robustness",
        "--model",
        t.model.to_str().unwrap(),
        "--dev",
        t.dev.to_str().unwrap(),
        "--seed",
        "6",
    ];
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5, "{}", text);
    assert!(lines[0].starts_with("baseline\t"));
    assert_eq!(lines[1], "op\t0.25\t0.50\t0.75\t1.00");
    let mut numbers = 0;
    for line in &lines[2..] {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 5);
        assert!(["insert", "delete", "substitute"].contains(&cols[0]));
        for v in &cols[1..] {
            let x: f64 = v.parse().unwrap();
            assert!((0.0..=1.0).contains(&x));
            numbers += 1;
        }
    }
    let baseline: f64 = lines[0].split('\t').nth(1).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&baseline));
    assert_eq!(numbers + 1, 13);

    // Determinism across runs.
    let again = run(&args);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn robustness_requires_a_pos_model() {
    let t = train_small("morph");
    let out = run(&[
        "robustness",
        "--model",
        t.model.to_str().unwrap(),
        "--dev",
        t.dev.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pos"));
}

#[test]
fn robustness_baseline_matches_eval() {
    let t = train_small("pos");
    let rob = run(&[
        "robustness",
        "--model",
        t.model.to_str().unwrap(),
        "--dev",
        t.dev.to_str().unwrap(),
    ]);
    let eval = run(&[
        "eval",
        "--model",
        t.model.to_str().unwrap(),
        "--gold",
        t.dev.to_str().unwrap(),
    ]);
    let baseline = stdout(&rob)
        .lines()
        .next()
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .to_string();
    let accuracy = stdout(&eval)
        .lines()
        .next()
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .to_string();
    assert_eq!(baseline, accuracy);
}
