//! Glue between corpora and the trainers: preprocessing, training inputs,
//! and held-out scoring.

use serde::{Deserialize, Serialize};

use crate::corpus::{
    export_conll, normalize_document, read_conll, AnnotatedDocument, ConceptFrequencies, NormalizationPolicy,
    NormalizationReport, Tokenizer,
};
use crate::embeddings::{EmbeddingStack, SubwordModel};
use crate::error::Result;
use crate::eval::{match_spans, prf_scores, token_accuracy, EvalReport, LabeledSpan, MatchCounts, MatchMode};
use crate::relation::{document_mentions, evaluate_candidates, generate_candidates, CandidatePolicy, RelationCandidate, RelationModel};
use crate::schema::SchemaDefinition;
use crate::scheme::{decode, TagScheme};
use crate::tagger::{predict, sentences_from_conll, Prediction, TaggedSentence, TaggerModel, TaggerTask};

/// Tokenizes documents that lack tokens, then applies `policy` with
/// concept frequencies counted over the whole set.
pub fn prepare_corpus(
    docs: &[AnnotatedDocument],
    tokenizer: &Tokenizer,
    policy: &NormalizationPolicy,
) -> (Vec<AnnotatedDocument>, NormalizationReport) {
    let tokenized: Vec<AnnotatedDocument> = docs
        .iter()
        .map(|d| {
            let mut d = d.clone();
            if !d.is_tokenized() {
                d.tokenize_with(tokenizer);
            }
            d
        })
        .collect();
    let freq = ConceptFrequencies::from_documents(&tokenized);
    let mut report = NormalizationReport::default();
    let out = tokenized
        .iter()
        .map(|d| {
            let (n, r) = normalize_document(d, policy, &freq);
            report.add(&r);
            n
        })
        .collect();
    (out, report)
}

pub fn corpus_conll(docs: &[AnnotatedDocument], scheme: TagScheme) -> Result<String> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&export_conll(d, scheme)?);
    }
    Ok(out)
}

pub fn tagged_sentences(docs: &[AnnotatedDocument], task: TaggerTask, scheme: TagScheme) -> Result<Vec<TaggedSentence>> {
    Ok(sentences_from_conll(&read_conll(&corpus_conll(docs, scheme)?)?, task))
}

pub fn token_sentences(docs: &[AnnotatedDocument]) -> Vec<Vec<String>> {
    docs.iter().flat_map(AnnotatedDocument::token_strings).collect()
}

/// Document texts separated by newlines, for character language models.
pub fn corpus_text(docs: &[AnnotatedDocument]) -> String {
    docs.iter().map(|d| d.text.as_str()).collect::<Vec<_>>().join("\n")
}

pub fn relation_candidates(docs: &[AnnotatedDocument], policy: &CandidatePolicy, schema: &SchemaDefinition) -> Vec<RelationCandidate> {
    docs.iter()
        .flat_map(document_mentions)
        .flat_map(|s| generate_candidates(&s, policy, schema))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaggerScores {
    Pos { accuracy: f64, tokens: usize },
    Concepts { strict: EvalReport, lenient: EvalReport },
}

/// Scores a tagger on held-out sentences, running the sentences in order
/// with one fresh pooling state.
pub fn evaluate_tagger(model: &TaggerModel, stack: &EmbeddingStack, sentences: &[TaggedSentence]) -> Result<TaggerScores> {
    let mut state = stack.new_state();
    let mut gold_tags = Vec::new();
    let mut pred_tags = Vec::new();
    let mut strict = MatchCounts::default();
    let mut lenient = MatchCounts::default();
    for (i, s) in sentences.iter().enumerate() {
        let offset = i * 100_000;
        match predict(model, stack, &mut state, &s.token_refs())? {
            Prediction::Tags(tags) => {
                gold_tags.extend(s.tags.iter().cloned());
                pred_tags.extend(tags);
            }
            Prediction::Spans(spans) => {
                let gold: Vec<LabeledSpan> = decode(&s.tags)
                    .into_iter()
                    .map(|t| LabeledSpan::new(t.start + offset, t.end + offset, t.label))
                    .collect();
                let pred: Vec<LabeledSpan> = spans
                    .into_iter()
                    .map(|p| LabeledSpan::new(p.start + offset, p.end + offset, p.label))
                    .collect();
                strict.merge(&match_spans(&gold, &pred, MatchMode::Strict));
                lenient.merge(&match_spans(&gold, &pred, MatchMode::Lenient));
            }
        }
    }
    Ok(match model.task {
        TaggerTask::Pos => TaggerScores::Pos {
            accuracy: token_accuracy(&gold_tags, &pred_tags)?,
            tokens: gold_tags.len(),
        },
        TaggerTask::Concepts => TaggerScores::Concepts {
            strict: prf_scores(&strict),
            lenient: prf_scores(&lenient),
        },
    })
}

/// Relation scores on gold concepts: every candidate pair is classified.
pub fn evaluate_relation_model(
    model: &RelationModel,
    words: &SubwordModel,
    docs: &[AnnotatedDocument],
    policy: &CandidatePolicy,
    schema: &SchemaDefinition,
) -> Result<EvalReport> {
    let all = CandidatePolicy {
        negative_ratio: 1.0,
        ..policy.clone()
    };
    evaluate_candidates(model, words, &relation_candidates(docs, &all, schema))
}
