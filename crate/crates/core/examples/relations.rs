//! Relation candidates from gold concepts and the convolutional relation
//! classifier, with and without concept-type features.
//!
//! cargo run --release --example relations

use mex::embeddings::{train_cbow, CbowConfig};
use mex::relation::{
    candidates_to_jsonl, document_mentions, predict_relations, train_relation_model, CandidatePolicy, RelationConfig,
};
use mex::workbench::{evaluate_relation_model, generate, prepare_corpus, relation_candidates, token_sentences, SyntheticSpec};
use mex::SchemaDefinition;

fn main() -> mex::Result<()> {
    let schema = SchemaDefinition::shipped();
    let spec = SyntheticSpec {
        seed: 5,
        documents: 200,
        second_annotator: false,
        ..SyntheticSpec::default()
    };
    let (docs, _) = prepare_corpus(&generate(&spec, &schema)?.primary, &Default::default(), &Default::default());
    let (train, rest) = docs.split_at(150);
    let (dev, test) = rest.split_at(25);

    let cbow = CbowConfig {
        dim: 32,
        min_count: 1,
        buckets: 100_000,
        ..CbowConfig::default()
    };
    let words = train_cbow(&token_sentences(train), &cbow)?.0;
    let policy = CandidatePolicy::default();
    let train_c = relation_candidates(train, &policy, &schema);
    let dev_c = relation_candidates(dev, &policy, &schema);
    println!("{} training candidates, first one:\n{}", train_c.len(), candidates_to_jsonl(&train_c[..1])?);

    for use_concepts in [true, false] {
        let config = RelationConfig {
            filters: 32,
            position_dim: 10,
            concept_dim: 10,
            epochs: 10,
            use_concepts,
            ..RelationConfig::default()
        };
        let (model, log) = train_relation_model(&train_c, &dev_c, &words, &schema, &config)?;
        let report = evaluate_relation_model(&model, &words, test, &policy, &schema)?;
        println!(
            "\nconcept features {use_concepts}: best dev F1 {:.4} at epoch {:?}",
            log.best_dev_f1, log.best_epoch
        );
        print!("{}", report.to_table());

        let sentence = &document_mentions(&test[0])[0];
        for r in predict_relations(&model, &words, sentence, &policy, &schema, 0.5)? {
            println!("{} {} -> {} ({:.2})", r.relation, r.arg1, r.arg2, r.confidence);
        }
    }
    Ok(())
}
