//! Synthetic corpus to trained bundle: embeddings, POS tagger, concept
//! tagger and relation model, each scored on held-out documents.
//!
//! cargo run --release --example synthetic_pipeline -- [train docs] [bundle dir]

use std::time::Instant;

use mex::embeddings::{train_cbow, CbowConfig, ProviderKind};
use mex::relation::{train_relation_model, CandidatePolicy, RelationConfig};
use mex::scheme::TagScheme;
use mex::tagger::{train_tagger, LabelVocab, Optimizer, TaggerTask, TrainConfig};
use mex::workbench::{
    annotate, evaluate_relation_model, evaluate_tagger, generate, prepare_corpus, relation_candidates, save_bundle,
    tagged_sentences, token_sentences, ModelBundle, RelationStage, SyntheticSpec, TaggerScores,
};
use mex::SchemaDefinition;

fn main() -> mex::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let train_docs: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(500);
    let schema = SchemaDefinition::shipped();
    let clock = Instant::now();

    let held_out = train_docs / 5;
    let spec = SyntheticSpec {
        seed: 7,
        documents: train_docs + 2 * held_out,
        second_annotator: false,
        ..SyntheticSpec::default()
    };
    let corpus = generate(&spec, &schema)?;
    let (docs, _) = prepare_corpus(&corpus.primary, &Default::default(), &Default::default());
    let (train, rest) = docs.split_at(train_docs);
    let (dev, test) = rest.split_at(held_out);
    println!("{} / {} / {} documents", train.len(), dev.len(), test.len());

    let cbow = CbowConfig {
        dim: 32,
        epochs: 5,
        min_count: 1,
        buckets: 100_000,
        seed: 7,
        ..CbowConfig::default()
    };
    let (words, _) = train_cbow(&token_sentences(train), &cbow)?;
    println!("embeddings: {:.1?}", clock.elapsed());

    let mut bundle = ModelBundle::new(&schema);
    bundle.words = Some(words.into());
    let stack = bundle.stack_for(&[ProviderKind::Word])?;

    for task in [TaggerTask::Pos, TaggerTask::Concepts] {
        let scheme = TagScheme::Bioes;
        let tr = tagged_sentences(train, task, scheme)?;
        let dv = tagged_sentences(dev, task, scheme)?;
        let te = tagged_sentences(test, task, scheme)?;
        let labels = match task {
            TaggerTask::Pos => LabelVocab::from_tags(tr.iter().flat_map(|s| s.tags.iter().map(String::as_str))),
            TaggerTask::Concepts => LabelVocab::for_concepts(&schema, scheme),
        };
        let mut config = TrainConfig::new(task, 7);
        config.hidden = 32;
        config.epochs = 20;
        config.optimizer = Optimizer::Adam;
        config.lr = 0.01;
        let mut state = stack.new_state();
        let (model, log) = train_tagger(&tr, &dv, &labels, &stack, &mut state, &config)?;
        match evaluate_tagger(&model, &stack, &te)? {
            TaggerScores::Pos { accuracy, .. } => println!("POS accuracy {accuracy:.4}"),
            TaggerScores::Concepts { strict, lenient } => println!(
                "concept micro F1 strict {:.4} lenient {:.4}",
                strict.micro.f1, lenient.micro.f1
            ),
        }
        println!("{} epochs, {:.1?}", log.epochs.len(), clock.elapsed());
        match task {
            TaggerTask::Pos => bundle.pos = Some(model),
            TaggerTask::Concepts => bundle.concepts = Some(model),
        }
    }

    let policy = CandidatePolicy::default();
    let words = bundle.words.clone().expect("trained above");
    let config = RelationConfig {
        filters: 32,
        position_dim: 10,
        concept_dim: 10,
        epochs: 30,
        seed: 7,
        ..RelationConfig::default()
    };
    let (model, log) = train_relation_model(
        &relation_candidates(train, &policy, &schema),
        &relation_candidates(dev, &policy, &schema),
        &words,
        &schema,
        &config,
    )?;
    let report = evaluate_relation_model(&model, &words, test, &policy, &schema)?;
    println!(
        "relation micro F1 {:.4} (best dev epoch {:?}), {:.1?}",
        report.micro.f1,
        log.best_epoch,
        clock.elapsed()
    );
    bundle.relations = Some(RelationStage {
        model,
        policy,
        threshold: 0.5,
    });

    let result = annotate(&bundle, &schema, &test[0].text)?;
    println!("{} concepts, {} relations in {}", result.concepts.len(), result.relations.len(), test[0].doc_id);
    if let Some(dir) = args.get(2) {
        save_bundle(&bundle, dir)?;
        println!("bundle written to {dir}");
    }
    Ok(())
}
