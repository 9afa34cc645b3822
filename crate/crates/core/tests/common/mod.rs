#![allow(dead_code)]

use mex::corpus::AnnotatedDocument;
use mex::embeddings::{train_cbow, train_char_lm, CbowConfig, CharLmConfig, Direction, ProviderKind};
use mex::relation::{train_relation_model, CandidatePolicy, RelationConfig};
use mex::scheme::TagScheme;
use mex::tagger::{train_tagger, LabelVocab, Optimizer, TaggerTask, TrainConfig};
use mex::workbench::{
    corpus_text, generate, prepare_corpus, relation_candidates, tagged_sentences, token_sentences, ModelBundle,
    RelationStage, SyntheticSpec,
};
use mex::SchemaDefinition;

/// Prepared single-annotator synthetic documents.
pub fn synthetic_docs(documents: usize, seed: u64) -> Vec<AnnotatedDocument> {
    let spec = SyntheticSpec {
        seed,
        documents,
        second_annotator: false,
        ..SyntheticSpec::default()
    };
    let corpus = generate(&spec, &SchemaDefinition::shipped()).unwrap();
    prepare_corpus(&corpus.primary, &Default::default(), &Default::default()).0
}

/// A quickly trained bundle with every component, plus held-out documents.
pub fn small_bundle(documents: usize, seed: u64) -> (ModelBundle, Vec<AnnotatedDocument>) {
    let schema = SchemaDefinition::shipped();
    let docs = synthetic_docs(documents + 10, seed);
    let (train, held_out) = docs.split_at(documents);
    let (dev, test) = held_out.split_at(5);

    let cbow = CbowConfig {
        dim: 16,
        epochs: 2,
        min_count: 1,
        buckets: 10_000,
        seed,
        ..CbowConfig::default()
    };
    let mut bundle = ModelBundle::new(&schema);
    bundle.words = Some(train_cbow(&token_sentences(train), &cbow).unwrap().0.into());

    let lm = CharLmConfig {
        hidden: 12,
        char_dim: 8,
        bptt: 32,
        epochs: 1,
        seed,
        ..CharLmConfig::default()
    };
    let text = corpus_text(&train[..3]);
    bundle.forward_lm = Some(train_char_lm(&text, Direction::Forward, &lm).unwrap().0.into());
    bundle.backward_lm = Some(train_char_lm(&text, Direction::Backward, &lm).unwrap().0.into());

    let stack = bundle.stack_for(&[ProviderKind::Word]).unwrap();
    for task in [TaggerTask::Pos, TaggerTask::Concepts] {
        let tr = tagged_sentences(train, task, TagScheme::Bioes).unwrap();
        let dv = tagged_sentences(dev, task, TagScheme::Bioes).unwrap();
        let labels = match task {
            TaggerTask::Pos => LabelVocab::from_tags(tr.iter().flat_map(|s| s.tags.iter().map(String::as_str))),
            TaggerTask::Concepts => LabelVocab::for_concepts(&schema, TagScheme::Bioes),
        };
        let mut config = TrainConfig::new(task, seed);
        config.hidden = 16;
        config.epochs = 3;
        config.optimizer = Optimizer::Adam;
        config.lr = 0.01;
        let mut state = stack.new_state();
        let (model, _) = train_tagger(&tr, &dv, &labels, &stack, &mut state, &config).unwrap();
        match task {
            TaggerTask::Pos => bundle.pos = Some(model),
            TaggerTask::Concepts => bundle.concepts = Some(model),
        }
    }

    let policy = CandidatePolicy::default();
    let config = RelationConfig {
        filters: 16,
        position_dim: 6,
        concept_dim: 6,
        epochs: 3,
        seed,
        ..RelationConfig::default()
    };
    let words = bundle.words.clone().unwrap();
    let (model, _) = train_relation_model(
        &relation_candidates(train, &policy, &schema),
        &relation_candidates(dev, &policy, &schema),
        &words,
        &schema,
        &config,
    )
    .unwrap();
    bundle.relations = Some(RelationStage {
        model,
        policy,
        threshold: 0.5,
    });
    (bundle, test.to_vec())
}

/// Starts the service on an ephemeral port in a background runtime.
pub fn spawn_service(
    bundle: ModelBundle,
    schema: SchemaDefinition,
    max_body: usize,
) -> (tokio::runtime::Runtime, std::net::SocketAddr) {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    let app = mex::workbench::router(std::sync::Arc::new(bundle), std::sync::Arc::new(schema), max_body);
    runtime.spawn(async move {
        let listener = tokio::net::TcpListener::from_std(listener).unwrap();
        mex::workbench::serve_on(listener, app).await
    });
    (runtime, addr)
}

/// One HTTP/1.1 request over a fresh connection; returns the status code and body.
pub fn http(addr: std::net::SocketAddr, method: &str, path: &str, content_type: &str, body: &[u8]) -> std::io::Result<(u16, Vec<u8>)> {
    use std::io::{Read, Write};
    let mut stream = std::net::TcpStream::connect(addr)?;
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(body)?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw)?;
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").unwrap_or(raw.len());
    let status = String::from_utf8_lossy(&raw[..split])
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    Ok((status, raw.get(split + 4..).unwrap_or_default().to_vec()))
}
