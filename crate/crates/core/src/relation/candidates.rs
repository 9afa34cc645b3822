use serde::{Deserialize, Serialize};

use crate::corpus::{token_range, AnnotatedDocument};
use crate::embeddings::fnv1a;
use crate::error::{Error, Result};
use crate::eval::NO_RELATION;
use crate::schema::SchemaDefinition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePolicy {
    /// Largest allowed distance between the two argument heads, in tokens.
    pub max_distance: usize,
    /// Ordered pairs when set; otherwise only pairs with arg1 before arg2.
    pub directed: bool,
    /// Fraction of `NO_RELATION` candidates kept.
    pub negative_ratio: f64,
    /// Skip pairs no relation signature accepts.
    pub signature_filter: bool,
    pub seed: u64,
}

impl Default for CandidatePolicy {
    fn default() -> Self {
        CandidatePolicy {
            max_distance: 50,
            directed: true,
            negative_ratio: 1.0,
            signature_filter: false,
            seed: 1,
        }
    }
}

impl CandidatePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_distance == 0 {
            return Err(Error::Config("candidate distance must be positive".into()));
        }
        if !(self.negative_ratio > 0.0 && self.negative_ratio <= 1.0) {
            return Err(Error::Config("negative ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// A concept mention inside one sentence, over tokens `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub start: usize,
    pub end: usize,
    pub concept: String,
}

/// A gold relation between two mentions of the same sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRelation {
    pub relation: String,
    pub arg1: String,
    pub arg2: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceMentions {
    pub doc_id: String,
    pub sentence: usize,
    pub tokens: Vec<String>,
    pub mentions: Vec<Mention>,
    pub relations: Vec<SentenceRelation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateArg {
    pub id: String,
    pub start: usize,
    pub end: usize,
    pub concept: String,
}

impl From<&Mention> for CandidateArg {
    fn from(m: &Mention) -> Self {
        CandidateArg {
            id: m.id.clone(),
            start: m.start,
            end: m.end,
            concept: m.concept.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationCandidate {
    pub doc_id: String,
    pub sentence: usize,
    pub tokens: Vec<String>,
    pub arg1: CandidateArg,
    pub arg2: CandidateArg,
    pub label: String,
    /// Set when the two arguments share a token.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub overlapping: bool,
}

/// Per-sentence mentions and relations of a tokenized document. Spans
/// that cross a sentence boundary and relations between sentences are skipped.
pub fn document_mentions(doc: &AnnotatedDocument) -> Vec<SentenceMentions> {
    let tokens = doc.token_strings();
    let mut out: Vec<SentenceMentions> = doc
        .sentences
        .iter()
        .enumerate()
        .map(|(i, _)| SentenceMentions {
            doc_id: doc.doc_id.clone(),
            sentence: i,
            tokens: tokens[i].clone(),
            ..Default::default()
        })
        .collect();
    let mut home = std::collections::HashMap::new();
    for span in &doc.spans {
        let env = span.envelope();
        let Some(si) = doc.sentences.iter().position(|s| s.contains(&env)) else {
            continue;
        };
        let Some((start, end)) = token_range(&doc.tokens[si], env) else {
            continue;
        };
        home.insert(span.id.as_str(), si);
        out[si].mentions.push(Mention {
            id: span.id.clone(),
            start,
            end,
            concept: span.concept.clone(),
        });
    }
    for r in &doc.relations {
        if let (Some(&a), Some(&b)) = (home.get(r.arg1.as_str()), home.get(r.arg2.as_str())) {
            if a == b {
                out[a].relations.push(SentenceRelation {
                    relation: r.relation.clone(),
                    arg1: r.arg1.clone(),
                    arg2: r.arg2.clone(),
                });
            }
        }
    }
    for s in &mut out {
        s.mentions.sort_by(|a, b| (a.start, a.end, &a.id).cmp(&(b.start, b.end, &b.id)));
    }
    out
}

fn keep_negative(policy: &CandidatePolicy, s: &SentenceMentions, a: &Mention, b: &Mention) -> bool {
    if policy.negative_ratio >= 1.0 {
        return true;
    }
    let key = format!("{}\u{0}{}\u{0}{}\u{0}{}\u{0}{}", policy.seed, s.doc_id, s.sentence, a.id, b.id);
    (fnv1a(key.as_bytes()) as f64 / u32::MAX as f64) < policy.negative_ratio
}

/// Every ordered pair of distinct mentions within the distance cap. The
/// label is the gold relation linking exactly that ordered pair, else `NO_RELATION`.
pub fn generate_candidates(
    sentence: &SentenceMentions,
    policy: &CandidatePolicy,
    schema: &SchemaDefinition,
) -> Vec<RelationCandidate> {
    let mut out = Vec::new();
    for (i, a) in sentence.mentions.iter().enumerate() {
        for (j, b) in sentence.mentions.iter().enumerate() {
            if i == j || (!policy.directed && j < i) {
                continue;
            }
            if a.start.abs_diff(b.start) > policy.max_distance {
                continue;
            }
            if policy.signature_filter && !schema.any_relation_accepts(&a.concept, &b.concept) {
                continue;
            }
            let label = sentence
                .relations
                .iter()
                .find(|r| r.arg1 == a.id && r.arg2 == b.id)
                .map_or(NO_RELATION, |r| r.relation.as_str());
            if label == NO_RELATION && !keep_negative(policy, sentence, a, b) {
                continue;
            }
            out.push(RelationCandidate {
                doc_id: sentence.doc_id.clone(),
                sentence: sentence.sentence,
                tokens: sentence.tokens.clone(),
                arg1: a.into(),
                arg2: b.into(),
                label: label.to_owned(),
                overlapping: a.start < b.end && b.start < a.end,
            });
        }
    }
    out
}

pub fn candidates_to_jsonl(cands: &[RelationCandidate]) -> Result<String> {
    let mut out = String::new();
    for c in cands {
        out.push_str(&serde_json::to_string(c)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn candidates_from_jsonl(text: &str) -> Result<Vec<RelationCandidate>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(n: usize) -> SentenceMentions {
        let concepts = ["Medication", "Dosing", "Time_information"];
        SentenceMentions {
            doc_id: "d".into(),
            sentence: 0,
            tokens: "Prograf 5 mg morgens".split(' ').map(String::from).collect(),
            mentions: (0..n)
                .map(|i| Mention {
                    id: format!("T{}", i + 1),
                    start: [0, 1, 3][i],
                    end: [1, 3, 4][i],
                    concept: concepts[i].into(),
                })
                .collect(),
            relations: vec![SentenceRelation {
                relation: "Has_dosing".into(),
                arg1: "T1".into(),
                arg2: "T2".into(),
            }],
        }
    }

    #[test]
    fn counts_and_labels() {
        let schema = SchemaDefinition::shipped();
        let p = CandidatePolicy::default();
        assert!(generate_candidates(&sentence(1), &p, &schema).is_empty());
        let c = generate_candidates(&sentence(3), &p, &schema);
        assert_eq!(c.len(), 6);
        let label = |a: &str, b: &str| c.iter().find(|x| x.arg1.id == a && x.arg2.id == b).unwrap().label.clone();
        assert_eq!(label("T1", "T2"), "Has_dosing");
        assert_eq!(label("T2", "T1"), NO_RELATION);
    }

    #[test]
    fn distance_and_filter() {
        let schema = SchemaDefinition::shipped();
        let near = CandidatePolicy {
            max_distance: 1,
            ..CandidatePolicy::default()
        };
        assert_eq!(generate_candidates(&sentence(3), &near, &schema).len(), 2);
        let filtered = CandidatePolicy {
            signature_filter: true,
            ..CandidatePolicy::default()
        };
        let c = generate_candidates(&sentence(3), &filtered, &schema);
        assert!(c.iter().all(|x| schema.any_relation_accepts(&x.arg1.concept, &x.arg2.concept)));
        assert!(c.len() < 6);
    }

    #[test]
    fn jsonl_round_trip() {
        let c = generate_candidates(&sentence(3), &CandidatePolicy::default(), &SchemaDefinition::shipped());
        assert_eq!(candidates_from_jsonl(&candidates_to_jsonl(&c).unwrap()).unwrap(), c);
    }
}
