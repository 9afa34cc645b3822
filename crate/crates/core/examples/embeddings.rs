//! Subword CBOW vectors, character language models and the stacked
//! word/contextual/pooled token features.
//!
//! cargo run --release --example embeddings

use std::sync::Arc;

use mex::embeddings::{
    cosine, train_cbow, train_char_lm, CbowConfig, CharLmConfig, Direction, EmbeddingProvider, EmbeddingStack,
    stack_embeddings, PoolingMode,
};
use mex::workbench::{corpus_text, generate, prepare_corpus, token_sentences, SyntheticSpec};
use mex::SchemaDefinition;

fn main() -> mex::Result<()> {
    let spec = SyntheticSpec {
        documents: 150,
        second_annotator: false,
        ..SyntheticSpec::default()
    };
    let corpus = generate(&spec, &SchemaDefinition::shipped())?;
    let (docs, _) = prepare_corpus(&corpus.primary, &Default::default(), &Default::default());

    let config = CbowConfig {
        dim: 32,
        min_count: 1,
        buckets: 100_000,
        ..CbowConfig::default()
    };
    let (words, stats) = train_cbow(&token_sentences(&docs), &config)?;
    println!("{} words, loss per epoch {:?}", words.vocab().len(), stats.epoch_loss);
    for query in ["Tacrolimus", "Sonographie", "Kreatinin", "Tacrolimus-Spiegel"] {
        let v = words.embed_word(query);
        let mut near: Vec<(f64, &str)> = words
            .vocab()
            .iter()
            .filter(|e| e.word != query)
            .map(|e| (cosine(&v, &words.embed_word(&e.word)), e.word.as_str()))
            .collect();
        near.sort_by(|a, b| b.0.total_cmp(&a.0));
        let known = if words.word_index(query).is_some() { "" } else { " (unseen)" };
        println!("{query}{known}: {:?}", &near[..4]);
    }

    let lm = CharLmConfig {
        hidden: 48,
        char_dim: 16,
        bptt: 64,
        epochs: 2,
        ..CharLmConfig::default()
    };
    let text = corpus_text(&docs[..40]);
    let (forward, fs) = train_char_lm(&text, Direction::Forward, &lm)?;
    let (backward, _) = train_char_lm(&text, Direction::Backward, &lm)?;
    println!("forward char LM held-out loss {:?}", fs.heldout_loss.last());
    println!("perplexity on a note: {:.2}", forward.perplexity("Prograf 5 mg morgens."));

    let (forward, backward) = (Arc::new(forward), Arc::new(backward));
    let stack = EmbeddingStack::new(vec![
        EmbeddingProvider::Word(words.into()),
        EmbeddingProvider::Contextual {
            forward: forward.clone(),
            backward: backward.clone(),
        },
        EmbeddingProvider::Pooled {
            forward,
            backward,
            mode: PoolingMode::Mean,
        },
    ]);
    println!("stack kinds {:?}, dim {}", stack.kinds(), stack.dim());
    let mut state = stack.new_state();
    let x = stack_embeddings(&stack, &["Prograf", "5", "mg", "morgens", "."], &mut state)?;
    println!("sentence features {:?}", x.dim());
    Ok(())
}
