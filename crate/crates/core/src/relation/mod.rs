//! Relation extraction: candidate pairs, a CNN classifier over word,
//! relative-position and concept-type features, and prediction.

mod candidates;
mod model;

pub use candidates::{
    candidates_from_jsonl, candidates_to_jsonl, document_mentions, generate_candidates, CandidateArg, CandidatePolicy,
    Mention, RelationCandidate, SentenceMentions, SentenceRelation,
};
pub use model::{
    clip_offset, evaluate_candidates, predict_relations, train_relation_model, Features, PredictedRelation,
    RelationConfig, RelationModel, RelationTrainingLog,
};
