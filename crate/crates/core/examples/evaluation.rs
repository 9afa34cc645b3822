//! Span scoring, inter-annotator agreement and fold plans on a synthetic
//! corpus annotated twice.
//!
//! cargo run --example evaluation -- [perturbation rate]

use mex::eval::{char_level_iaa, make_folds, match_spans, prf_scores, LabeledSpan, MatchCounts, MatchMode, DEFAULT_RATIOS};
use mex::workbench::{generate, SyntheticSpec};
use mex::SchemaDefinition;

fn main() -> mex::Result<()> {
    let rate: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.15);
    let schema = SchemaDefinition::shipped();
    let spec = SyntheticSpec {
        documents: 40,
        perturbation_rate: rate,
        ..SyntheticSpec::default()
    };
    let corpus = generate(&spec, &schema)?;

    let all: Vec<_> = corpus.primary.iter().chain(&corpus.second).cloned().collect();
    let iaa = char_level_iaa(&all);
    for p in &iaa.pairs {
        println!(
            "{} vs {} over {} documents: concepts {:.3}, relations {:?}",
            p.annotator_a,
            p.annotator_b,
            p.shared_documents,
            p.concept_f1(),
            p.relation_f1()
        );
    }

    // Score the second annotator as if it were a system.
    let mut strict = MatchCounts::default();
    let mut lenient = MatchCounts::default();
    for (gold, pred) in corpus.primary.iter().zip(&corpus.second) {
        let g = LabeledSpan::from_document(gold);
        let p = LabeledSpan::from_document(pred);
        strict.merge(&match_spans(&g, &p, MatchMode::Strict));
        lenient.merge(&match_spans(&g, &p, MatchMode::Lenient));
    }
    print!("\nstrict\n{}", prf_scores(&strict).to_table());
    print!("\nlenient\n{}", prf_scores(&lenient).to_table());

    let ids: Vec<String> = corpus.primary.iter().map(|d| d.doc_id.clone()).collect();
    let plan = make_folds(&ids, 5, DEFAULT_RATIOS, 1)?;
    for (i, f) in plan.folds.iter().enumerate() {
        println!("fold {i}: {} train, {} dev, {} test, first test doc {}", f.train.len(), f.dev.len(), f.test.len(), f.test[0]);
    }
    Ok(())
}
