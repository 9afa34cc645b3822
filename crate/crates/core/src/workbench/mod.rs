//! The end-to-end workbench: model bundles, the annotate pipeline,
//! synthetic corpora, the HTTP service and the command line.

mod annotate;
mod bundle;
mod cli;
pub mod codec;
mod pipeline;
mod serve;
mod synth;

pub use annotate::{
    annotate, AnnotationResult, ConceptResult, OutputFormat, RelationResult, SentenceResult, TokenResult,
};
pub use bundle::{
    load_bundle, load_bundle_for, read_manifest, save_bundle, BundleSummary, ComponentEntry, Manifest, ModelBundle,
    RelationStage, TokenizerConfig, COMPONENTS, MANIFEST_FILE,
};
pub use cli::{exit_code, run_cli, BUNDLE_ENV};
pub use pipeline::{
    corpus_conll, corpus_text, evaluate_relation_model, evaluate_tagger, prepare_corpus, relation_candidates,
    tagged_sentences, token_sentences, TaggerScores,
};
pub use serve::{router, serve, serve_on, DEFAULT_MAX_BODY};
pub use synth::{
    corpus_report, generate, perturb, synth_corpus, synthetic_pos, SynthReport, SyntheticCorpus, SyntheticSpec,
    Template,
};
