use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{token_range, AnnotatedDocument, CharIndex, CharSpan, SpanAnnotation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseDiscontinuous {
    #[default]
    Envelope,
    Drop,
}

/// Preprocessing rules applied before training. Serialized next to every
/// derived corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub drop_cross_sentence: bool,
    /// Always `longest_span`: a span strictly inside another is removed.
    pub nested_resolution: String,
    /// Always `corpus_frequency`: among spans sharing a token, the concept
    /// type with the higher corpus frequency wins, ties by type name.
    pub multi_label_resolution: String,
    pub collapse_discontinuous: CollapseDiscontinuous,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        NormalizationPolicy {
            drop_cross_sentence: true,
            nested_resolution: "longest_span".into(),
            multi_label_resolution: "corpus_frequency".into(),
            collapse_discontinuous: CollapseDiscontinuous::Envelope,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub discontinuous_collapsed: usize,
    pub discontinuous_dropped: usize,
    pub cross_sentence: usize,
    pub nested: usize,
    pub multi_label: usize,
    pub relations_dropped: usize,
    pub attributes_dropped: usize,
}

impl NormalizationReport {
    pub fn is_zero(&self) -> bool {
        *self == NormalizationReport::default()
    }

    pub fn add(&mut self, other: &NormalizationReport) {
        self.discontinuous_collapsed += other.discontinuous_collapsed;
        self.discontinuous_dropped += other.discontinuous_dropped;
        self.cross_sentence += other.cross_sentence;
        self.nested += other.nested;
        self.multi_label += other.multi_label;
        self.relations_dropped += other.relations_dropped;
        self.attributes_dropped += other.attributes_dropped;
    }
}

/// Concept-type frequencies over a corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptFrequencies(pub BTreeMap<String, u64>);

impl ConceptFrequencies {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a AnnotatedDocument>) -> Self {
        let mut map = BTreeMap::new();
        for doc in docs {
            for s in &doc.spans {
                *map.entry(s.concept.clone()).or_insert(0) += 1;
            }
        }
        ConceptFrequencies(map)
    }

    pub fn get(&self, concept: &str) -> u64 {
        self.0.get(concept).copied().unwrap_or(0)
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for ConceptFrequencies {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        ConceptFrequencies(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Applies `policy` to a tokenized document. Idempotent.
pub fn normalize_document(
    doc: &AnnotatedDocument,
    policy: &NormalizationPolicy,
    freq: &ConceptFrequencies,
) -> (AnnotatedDocument, NormalizationReport) {
    let mut report = NormalizationReport::default();
    let index = CharIndex::new(&doc.text);

    let mut spans: Vec<SpanAnnotation> = Vec::with_capacity(doc.spans.len());
    for s in &doc.spans {
        if !s.is_discontinuous() {
            spans.push(s.clone());
            continue;
        }
        match policy.collapse_discontinuous {
            CollapseDiscontinuous::Drop => report.discontinuous_dropped += 1,
            CollapseDiscontinuous::Envelope => {
                let env = s.envelope();
                report.discontinuous_collapsed += 1;
                spans.push(SpanAnnotation {
                    fragments: vec![env],
                    surface: index.slice(&doc.text, env).to_owned(),
                    ..s.clone()
                });
            }
        }
    }

    if policy.drop_cross_sentence {
        let before = spans.len();
        spans.retain(|s| {
            let env = s.envelope();
            doc.sentences.iter().any(|sent| sent.contains(&env))
        });
        report.cross_sentence = before - spans.len();
    }

    // Nested: drop spans strictly inside another span.
    let envs: Vec<CharSpan> = spans.iter().map(SpanAnnotation::envelope).collect();
    let inner: Vec<bool> = envs
        .iter()
        .map(|e| envs.iter().any(|o| o != e && o.contains(e)))
        .collect();
    report.nested = inner.iter().filter(|&&x| x).count();
    let mut spans: Vec<SpanAnnotation> = spans
        .into_iter()
        .zip(inner)
        .filter_map(|(s, drop)| (!drop).then_some(s))
        .collect();

    // Multi-label: spans that share a character or a token compete; the
    // more frequent concept type wins.
    let token_of = |env: CharSpan| -> Option<(usize, usize, usize)> {
        doc.tokens.iter().enumerate().find_map(|(si, toks)| {
            token_range(toks, env).map(|(a, b)| (si, a, b))
        })
    };
    let keyed: Vec<(CharSpan, Option<(usize, usize, usize)>)> = spans
        .iter()
        .map(|s| (s.envelope(), token_of(s.envelope())))
        .collect();
    let conflicts = |a: usize, b: usize| -> bool {
        let (ea, ta) = keyed[a];
        let (eb, tb) = keyed[b];
        if ea.overlap(&eb) > 0 {
            return true;
        }
        match (ta, tb) {
            (Some((sa, a0, a1)), Some((sb, b0, b1))) => sa == sb && a0 < b1 && b0 < a1,
            _ => false,
        }
    };
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&spans[a], &spans[b]);
        freq.get(&sb.concept)
            .cmp(&freq.get(&sa.concept))
            .then_with(|| sa.concept.cmp(&sb.concept))
            .then_with(|| keyed[a].0.cmp(&keyed[b].0))
            .then_with(|| sa.id.cmp(&sb.id))
    });
    let mut accepted: Vec<usize> = Vec::new();
    for i in order {
        if accepted.iter().all(|&j| !conflicts(i, j)) {
            accepted.push(i);
        }
    }
    report.multi_label = spans.len() - accepted.len();
    let keep: HashSet<usize> = accepted.into_iter().collect();
    let mut idx = 0;
    spans.retain(|_| {
        idx += 1;
        keep.contains(&(idx - 1))
    });

    let alive: HashSet<&str> = spans.iter().map(|s| s.id.as_str()).collect();
    let relations: Vec<_> = doc
        .relations
        .iter()
        .filter(|r| alive.contains(r.arg1.as_str()) && alive.contains(r.arg2.as_str()))
        .cloned()
        .collect();
    report.relations_dropped = doc.relations.len() - relations.len();
    let attributes: Vec<_> = doc
        .attributes
        .iter()
        .filter(|a| alive.contains(a.target.as_str()))
        .cloned()
        .collect();
    report.attributes_dropped = doc.attributes.len() - attributes.len();

    let out = AnnotatedDocument {
        spans,
        relations,
        attributes,
        ..doc.clone()
    };
    (out, report)
}
