use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use catgen::model::ModelParameters;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

/// Runs `catgen` with whitespace-separated arguments inside `dir`.
fn catgen(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catgen"))
        .args(args.split_whitespace())
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &str) -> (String, String) {
    let out = catgen(dir, args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(out.status.success(), "catgen {args}: {stderr}");
    (String::from_utf8(out.stdout).unwrap(), stderr)
}

fn failure(dir: &Path, args: &str) -> String {
    let out = catgen(dir, args);
    assert!(!out.status.success(), "catgen {args} succeeded");
    assert!(out.stdout.is_empty());
    String::from_utf8(out.stderr).unwrap()
}

/// Temporary directory holding the toy corpus and its artifacts.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("toy_train.pipe"), dir.path().join("train.pipe")).unwrap();
    ok(dir.path(), "build-vocab --corpus train.pipe --threshold 1 --out art");
    dir
}

const INV: &str = "--inventory art/inventory.txt";

#[test]
fn trace_of_transitive_verb() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = ok(dir.path(), "trace --category (S\\NP)/NP");
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0], "0\t\t\tgen(S)");
    assert_eq!(rows[7], "7\t(S\\NP)/NP\tS|NP|NP\tstop");
    let (out, _) = ok(dir.path(), "trace --category N");
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn trace_file_has_header_and_column_names() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), "trace --category N --out t.tsv");
    let text = fs::read_to_string(dir.path().join("t.tsv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[..3],
        ["# catgen trace", "# category=N", "timestep\tstack\tbuffer\taction"]
    );
    assert_eq!(lines.len(), 5);
}

#[test]
fn unparseable_category_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let err = failure(dir.path(), "trace --category ((A");
    assert!(err.contains("offset"), "{err}");
}

#[test]
fn missing_model_is_a_clear_error() {
    let dir = workspace();
    let err = failure(
        dir.path(),
        &format!("tag --mode classifier --corpus train.pipe {INV} --model none.model"),
    );
    assert!(err.contains("none.model") && err.contains("No such file"), "{err}");
}

#[test]
fn build_vocab_reports_statistics() {
    let dir = workspace();
    let d = dir.path();
    let (out, _) = ok(d, "build-vocab --corpus train.pipe --threshold 1 --oracle or --out or");
    assert!(out.contains("mean_length=2.0000"), "{out}");
    ok(
        d,
        "build-vocab --corpus train.pipe --threshold 1 --oracle ng --n 2 --k 10 --out ng",
    );
    let vocab = fs::read_to_string(d.join("ng/vocab.txt")).unwrap();
    let body: Vec<&str> = vocab.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "kind=NG n=2 k=10");
}

#[test]
fn corpus_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.pipe"), "a|x|N\nb|x|(N\n").unwrap();
    let err = failure(dir.path(), "build-vocab --corpus bad.pipe --out art");
    assert!(err.contains("bad.pipe") && err.contains("line 2"), "{err}");
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::copy(fixture("toy_train.pipe"), d.join("train.pipe")).unwrap();
    fs::write(d.join("run.toml"), "threshold = 1\nepochs = 2\nlr = 0.5\n").unwrap();
    ok(d, "--config run.toml build-vocab --corpus train.pipe --out art");
    let inv = fs::read_to_string(d.join("art/inventory.txt")).unwrap();
    assert!(inv.contains("# threshold=1"));
    ok(
        d,
        &format!("train --config run.toml --component classifier --corpus train.pipe {INV} --epochs 3 --out cls.model"),
    );
    let model = fs::read_to_string(d.join("cls.model")).unwrap();
    assert!(model.contains("# epochs=3") && model.contains("# lr=0.5"), "{model}");
    assert!(model.contains("# seed=20210501"));

    fs::write(d.join("typo.toml"), "treshold = 1\n").unwrap();
    failure(d, "--config typo.toml trace --category N");
}

#[test]
fn zero_learning_rate_leaves_weights_at_zero() {
    let dir = workspace();
    let d = dir.path();
    ok(
        d,
        &format!("train --component classifier --corpus train.pipe {INV} --lr 0 --epochs 2 --out cls.model"),
    );
    let params = ModelParameters::load(&d.join("cls.model")).unwrap();
    assert_eq!(params.nonzero_weights(), 0);
}

#[test]
fn transition_mode_never_emits_ill_formed_output() {
    let dir = workspace();
    let d = dir.path();
    ok(
        d,
        &format!("train --component transition --corpus train.pipe {INV} --epochs 1 --out tr.model"),
    );
    let (_, err) = ok(
        d,
        &format!("tag --mode transition --corpus train.pipe {INV} --model tr.model --out tr.pred"),
    );
    assert!(err.contains("illegal_rate=0.0"), "{err}");
}

fn train_pair(d: &Path) {
    ok(
        d,
        &format!("train --component classifier --corpus train.pipe {INV} --epochs 1 --out cls.model"),
    );
    ok(
        d,
        &format!(
            "train --component generator --corpus train.pipe {INV} --vocab art/vocab.txt --epochs 1 --out gen.model"
        ),
    );
}

#[test]
fn rerank_rejects_a_dump_of_another_corpus() {
    let dir = workspace();
    let d = dir.path();
    fs::copy(fixture("unseen_test.pipe"), d.join("other.pipe")).unwrap();
    train_pair(d);
    ok(
        d,
        &format!(
            "tag --corpus other.pipe {INV} --vocab art/vocab.txt --model gen.model --dump other.dump --out o.pred"
        ),
    );
    let err = failure(
        d,
        &format!("rerank --corpus train.pipe {INV} --model cls.model --dump other.dump"),
    );
    assert!(err.contains("other.dump"), "{err}");
}

#[test]
fn rerank_defaults_are_echoed() {
    let dir = workspace();
    let d = dir.path();
    train_pair(d);
    ok(
        d,
        &format!("tag --corpus train.pipe {INV} --vocab art/vocab.txt --model gen.model --dump g.dump --out g.pred"),
    );
    ok(
        d,
        &format!("rerank --corpus train.pipe {INV} --model cls.model --dump g.dump --out r.pred --report r.tsv"),
    );
    let pred = fs::read_to_string(d.join("r.pred")).unwrap();
    assert!(pred.contains("# lambda=0.9\n") && pred.contains("# nu=0.15\n"));
    let report = fs::read_to_string(d.join("r.tsv")).unwrap();
    let rows: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 116);
    assert!(rows.iter().all(|r| r.split('\t').count() == 7 && r.ends_with("\tg")));
}

#[test]
fn self_evaluation_is_perfect() {
    let dir = workspace();
    let (out, _) = ok(dir.path(), &format!("eval --corpus train.pipe --pred train.pipe {INV}"));
    assert!(out.starts_with("accuracy\t100.00%\t(116/116)"), "{out}");
}
