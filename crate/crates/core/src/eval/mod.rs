//! Scoring: strict and lenient span matching, precision/recall/F1 reports,
//! token accuracy, character-level agreement, and cross-validation folds.

mod folds;
mod iaa;
mod matching;
mod relations;
mod scores;

pub use folds::{make_folds, Fold, FoldPlan, DEFAULT_RATIOS, MIN_DOCUMENTS};
pub use iaa::{char_level_iaa, IaaReport, PairAgreement};
pub use matching::{match_spans, match_spans_with, LabeledSpan, LenientStrategy, MatchConfig, MatchMode};
pub use relations::{evaluate_grounded_relations, evaluate_relations, GroundedRelation, LabelPair, NO_RELATION};
pub use scores::{
    prf_scores, summarize_folds, token_accuracy, ClassCounts, ClassRecord, EvalReport, FoldSummary,
    MatchCounts, MeanStd, Scores,
};
