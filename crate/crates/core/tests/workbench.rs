mod common;

use std::sync::OnceLock;

use mex::corpus::AnnotatedDocument;
use mex::eval::char_level_iaa;
use mex::workbench::{
    annotate, generate, load_bundle, load_bundle_for, read_manifest, save_bundle, AnnotationResult, ModelBundle,
    OutputFormat, SyntheticSpec, COMPONENTS,
};
use mex::{Error, SchemaDefinition};

fn trained() -> &'static (ModelBundle, Vec<AnnotatedDocument>) {
    static BUNDLE: OnceLock<(ModelBundle, Vec<AnnotatedDocument>)> = OnceLock::new();
    BUNDLE.get_or_init(|| common::small_bundle(30, 9))
}

fn reordered_schema() -> SchemaDefinition {
    let text = include_str!("../assets/schema.toml").replace("\"Process\",\n    \"Person\",", "\"Person\",\n    \"Process\",");
    SchemaDefinition::from_toml(&text).unwrap()
}

#[test]
fn bundle_round_trip_and_failures() {
    let (bundle, _) = trained();
    let schema = SchemaDefinition::shipped();
    let tmp = tempfile::tempdir().unwrap();
    save_bundle(bundle, tmp.path()).unwrap();

    let manifest = read_manifest(tmp.path()).unwrap();
    let names: Vec<&str> = manifest.components.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, COMPONENTS);
    assert_eq!(manifest.schema_fingerprint, schema.fingerprint());

    let loaded = load_bundle_for(tmp.path(), &schema).unwrap();
    assert_eq!(loaded.summary(), bundle.summary());
    match load_bundle_for(tmp.path(), &reordered_schema()) {
        Err(Error::Fingerprint { .. }) => {}
        other => panic!("expected a fingerprint error, got {:?}", other.err()),
    }

    std::fs::remove_file(tmp.path().join("pos.mexw")).unwrap();
    match load_bundle(tmp.path()) {
        Err(Error::MissingComponent("pos")) => {}
        other => panic!("expected a missing component, got {:?}", other.err()),
    }
}

#[test]
fn annotate_needs_every_stage() {
    let schema = SchemaDefinition::shipped();
    let err = annotate(&ModelBundle::new(&schema), &schema, "Prograf 5 mg").unwrap_err();
    assert!(matches!(err, Error::MissingComponent(_)), "{err}");
    let (bundle, _) = trained();
    assert!(matches!(annotate(bundle, &reordered_schema(), "x"), Err(Error::Fingerprint { .. })));
}

#[test]
fn annotation_contract() {
    let (bundle, held_out) = trained();
    let schema = SchemaDefinition::shipped();

    let empty = annotate(bundle, &schema, "").unwrap();
    assert!(empty.sentences.is_empty() && empty.concepts.is_empty() && empty.relations.is_empty());

    for doc in held_out {
        let first = annotate(bundle, &schema, &doc.text).unwrap();
        let second = annotate(bundle, &schema, &doc.text).unwrap();
        assert_eq!(first.to_json().unwrap(), second.to_json().unwrap());
        assert_eq!(AnnotationResult::from_json(&first.to_json().unwrap()).unwrap(), first);

        let chars: Vec<char> = doc.text.chars().collect();
        for c in &first.concepts {
            assert!((0.0..=1.0).contains(&c.confidence));
            assert_eq!(chars[c.start..c.end].iter().collect::<String>(), c.text);
        }
        for r in &first.relations {
            assert!((0.0..=1.0).contains(&r.confidence));
            assert!(first.concepts.iter().any(|c| c.id == r.arg1));
            assert!(first.concepts.iter().any(|c| c.id == r.arg2));
        }
        let standoff = first.render(OutputFormat::Standoff).unwrap();
        assert_eq!(standoff.lines().count(), first.concepts.len() + first.relations.len());
        let conll = first.render(OutputFormat::Conll).unwrap();
        let tokens: usize = first.sentences.iter().map(|s| s.tokens.len()).sum();
        assert_eq!(conll.lines().filter(|l| !l.is_empty()).count(), tokens);
    }
}

#[test]
fn service_endpoints() {
    let (bundle, held_out) = trained();
    let schema = SchemaDefinition::shipped();
    let text = &held_out[1].text;
    let expected = annotate(bundle, &schema, text).unwrap().to_json().unwrap();
    let (runtime, addr) = common::spawn_service(bundle.clone(), schema, 4096);

    let (status, body) = common::http(addr, "GET", "/health", "text/plain", b"").unwrap();
    assert_eq!(status, 200);
    let health: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["components"].as_array().unwrap().len(), COMPONENTS.len());

    let (status, body) = common::http(addr, "POST", "/annotate", "text/plain", text.as_bytes()).unwrap();
    assert_eq!((status, body), (200, expected.clone().into_bytes()));
    let json = serde_json::json!({ "text": text }).to_string();
    let (status, body) = common::http(addr, "POST", "/annotate", "application/json", json.as_bytes()).unwrap();
    assert_eq!((status, body), (200, expected.into_bytes()));

    let (status, body) = common::http(addr, "POST", "/annotate", "text/plain", b"").unwrap();
    assert_eq!(status, 200);
    assert!(AnnotationResult::from_json(std::str::from_utf8(&body).unwrap()).unwrap().concepts.is_empty());

    let (status, _) = common::http(addr, "POST", "/annotate", "application/json", b"{\"txt\": 1}").unwrap();
    assert_eq!(status, 400);
    let (status, _) = common::http(addr, "POST", "/annotate", "text/plain", &vec![b'a'; 10_000]).unwrap();
    assert_eq!(status, 413);
    runtime.shutdown_background();
}

#[test]
fn unperturbed_second_annotator_agrees_fully() {
    let schema = SchemaDefinition::shipped();
    let iaa = |rate: f64| {
        let spec = SyntheticSpec {
            documents: 20,
            perturbation_rate: rate,
            ..SyntheticSpec::default()
        };
        let corpus = generate(&spec, &schema).unwrap();
        let all: Vec<AnnotatedDocument> = corpus.primary.into_iter().chain(corpus.second).collect();
        char_level_iaa(&all).concept_f1
    };
    assert_eq!(iaa(0.0), 1.0);
    let noisy = iaa(0.3);
    assert!(noisy < 1.0 && noisy > 0.5, "{noisy}");
}
