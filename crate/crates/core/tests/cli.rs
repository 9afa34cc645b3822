use std::path::Path;
use std::process::{Command, Output};

fn mex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mex"))
        .args(args)
        .env_remove("MEX_BUNDLE")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mex(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_bad_flags() {
    let help = mex(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("Usage"));
    assert_eq!(mex(&["annotate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(mex(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn missing_bundle_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mex(&["annotate", "--bundle", p(&tmp.path().join("absent"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn synthetic_recipe() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let split = tmp.path().join("split");
    let bundle = tmp.path().join("bundle");

    ok(&["--seed", "3", "synth", "--out", p(&corpus), "--documents", "200", "--single-annotator"]);
    ok(&["split", "--corpus", p(&corpus), "--out", p(&split)]);
    for f in ["plan.json", "split.json", "train.conll", "dev.conll", "test.conll"] {
        assert!(split.join(f).exists(), "{f}");
    }
    ok(&[
        "train-embeddings", "--corpus", p(&corpus), "--bundle", p(&bundle), "--dim", "32", "--min-count", "1",
        "--buckets", "100000",
    ]);
    let train = split.join("train.conll");
    let dev = split.join("dev.conll");
    let test = split.join("test.conll");
    for (task, epochs) in [("pos", "5"), ("concepts", "20")] {
        ok(&[
            "train-tagger", "--task", task, "--train", p(&train), "--dev", p(&dev), "--bundle", p(&bundle),
            "--hidden", "32", "--epochs", epochs, "--optimizer", "adam", "--lr", "0.01",
        ]);
    }
    ok(&[
        "train-relations", "--corpus", p(&corpus), "--split", p(&split), "--bundle", p(&bundle), "--filters", "16",
        "--position-dim", "6", "--concept-dim", "6", "--epochs", "5",
    ]);

    let report = ok(&[
        "evaluate", "--bundle", p(&bundle), "--test", p(&test), "--corpus", p(&corpus), "--split", p(&split),
    ]);
    let f1: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("concepts micro F1 (strict): "))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no concept score in:\n{report}"));
    assert!(f1 >= 0.95, "{report}");
    assert!(report.contains("pos accuracy: "));
    assert!(report.contains("relations micro F1: "));

    let text = tmp.path().join("note.txt");
    std::fs::write(&text, "Prograf 5 mg morgens. Kein Hinweis auf Ödeme.").unwrap();
    let json = ok(&["annotate", "--bundle", p(&bundle), "--input", p(&text)]);
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["sentences"].as_array().unwrap().len(), 2);
    let schema_def = mex::SchemaDefinition::shipped();
    let loaded = mex::workbench::load_bundle_for(&bundle, &schema_def).unwrap();
    let in_process = mex::workbench::annotate(&loaded, &schema_def, &std::fs::read_to_string(&text).unwrap()).unwrap();
    assert_eq!(json, in_process.to_json().unwrap());
    let standoff = ok(&["annotate", "--bundle", p(&bundle), "--input", p(&text), "--format", "standoff"]);
    assert!(standoff.lines().all(|l| l.starts_with('T') || l.starts_with('R')));

    // Evaluating against a different schema must fail on the fingerprint.
    let schema = tmp.path().join("schema.toml");
    let shipped = include_str!("../assets/schema.toml");
    let reordered = shipped.replace("\"Process\",\n    \"Person\",", "\"Person\",\n    \"Process\",");
    assert_ne!(reordered, shipped);
    std::fs::write(&schema, reordered).unwrap();
    let out = mex(&["--schema", p(&schema), "evaluate", "--bundle", p(&bundle), "--test", p(&test)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
}
