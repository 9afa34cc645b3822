//! Trains the BiLSTM-CRF concept tagger on synthetic notes and tags a
//! new sentence.
//!
//! cargo run --release --example concept_tagger -- [train docs]

use mex::embeddings::{train_cbow, CbowConfig, EmbeddingProvider, EmbeddingStack};
use mex::scheme::TagScheme;
use mex::tagger::{predict, train_tagger, LabelVocab, Optimizer, Prediction, TaggerTask, TrainConfig};
use mex::workbench::{evaluate_tagger, generate, prepare_corpus, tagged_sentences, token_sentences, SyntheticSpec, TaggerScores};
use mex::SchemaDefinition;

fn main() -> mex::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(120);
    let schema = SchemaDefinition::shipped();
    let spec = SyntheticSpec {
        seed: 4,
        documents: n + 40,
        second_annotator: false,
        ..SyntheticSpec::default()
    };
    let (docs, _) = prepare_corpus(&generate(&spec, &schema)?.primary, &Default::default(), &Default::default());
    let (train, rest) = docs.split_at(n);
    let (dev, test) = rest.split_at(20);

    let cbow = CbowConfig {
        dim: 32,
        min_count: 1,
        buckets: 100_000,
        ..CbowConfig::default()
    };
    let words = train_cbow(&token_sentences(train), &cbow)?.0;
    let stack = EmbeddingStack::new(vec![EmbeddingProvider::Word(words.into())]);

    let scheme = TagScheme::Bioes;
    let mut config = TrainConfig::new(TaggerTask::Concepts, 4);
    config.hidden = 32;
    config.epochs = 15;
    config.optimizer = Optimizer::Adam;
    config.lr = 0.01;
    let labels = LabelVocab::for_concepts(&schema, scheme);
    let mut state = stack.new_state();
    let (model, log) = train_tagger(
        &tagged_sentences(train, TaggerTask::Concepts, scheme)?,
        &tagged_sentences(dev, TaggerTask::Concepts, scheme)?,
        &labels,
        &stack,
        &mut state,
        &config,
    )?;
    print!("{}", log.to_text());

    if let TaggerScores::Concepts { strict, lenient } =
        evaluate_tagger(&model, &stack, &tagged_sentences(test, TaggerTask::Concepts, scheme)?)?
    {
        print!("{}", strict.to_table());
        println!("lenient micro F1 {:.4}", lenient.micro.f1);
    }

    let tokens = ["Sonographie", "zeigt", "Hydronephrose", "links", "."];
    let mut state = stack.new_state();
    if let Prediction::Spans(spans) = predict(&model, &stack, &mut state, &tokens)? {
        for s in spans {
            println!("{:<20} {} ({:.2})", s.label, tokens[s.start..s.end].join(" "), s.confidence);
        }
    }
    Ok(())
}
