//! BiLSTM-CRF sequence tagger for part-of-speech tags and concept spans.

pub mod crf;
mod labels;
mod model;

pub use crf::{crf_neg_log_likelihood, log_partition, marginals, path_score, viterbi_decode, CrfLoss};
pub use labels::{encode_labels, LabelVocab};
pub(crate) use model::TaggerNet;
pub use model::{
    predict, sentences_from_conll, train_tagger, EpochRecord, Optimizer, PredictedSpan, Prediction,
    TaggedSentence, TaggerModel, TaggerTask, TrainConfig, TrainingLog,
};
