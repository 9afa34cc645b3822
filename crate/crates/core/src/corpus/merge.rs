use std::collections::{BTreeMap, HashMap};

use log::info;
use serde::{Deserialize, Serialize};

use super::AnnotatedDocument;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeDecision {
    pub doc_id: String,
    pub kept: String,
    pub candidates: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct MergeOutcome {
    /// One document per id, ordered by id.
    pub documents: Vec<AnnotatedDocument>,
    /// One entry per document that had more than one version.
    pub decisions: Vec<MergeDecision>,
}

/// Picks one version per document: the annotator with the most documents
/// overall wins, ties go to the lexicographically smaller annotator id.
///
/// Annotators missing from `annotator_doc_counts` are counted from `versions`.
pub fn merge_annotators(
    versions: Vec<AnnotatedDocument>,
    annotator_doc_counts: &HashMap<String, usize>,
) -> Result<MergeOutcome> {
    let mut observed: HashMap<String, usize> = HashMap::new();
    for v in &versions {
        *observed.entry(v.annotator_id.clone()).or_insert(0) += 1;
    }
    let count = |a: &str| {
        annotator_doc_counts
            .get(a)
            .or_else(|| observed.get(a))
            .copied()
            .unwrap_or(0)
    };

    let mut grouped: BTreeMap<String, Vec<AnnotatedDocument>> = BTreeMap::new();
    for v in versions {
        grouped.entry(v.doc_id.clone()).or_default().push(v);
    }

    let mut out = MergeOutcome::default();
    for (doc_id, mut group) in grouped {
        if let Some(diff) = group.iter().find(|v| v.text != group[0].text) {
            return Err(Error::Corpus(format!(
                "document {doc_id}: annotators {} and {} disagree on the text",
                group[0].annotator_id, diff.annotator_id
            )));
        }
        group.sort_by(|a, b| {
            count(&b.annotator_id)
                .cmp(&count(&a.annotator_id))
                .then_with(|| a.annotator_id.cmp(&b.annotator_id))
        });
        if group.len() > 1 {
            let decision = MergeDecision {
                doc_id: doc_id.clone(),
                kept: group[0].annotator_id.clone(),
                candidates: group.iter().map(|v| v.annotator_id.clone()).collect(),
            };
            info!(
                "merge {}: kept {} of {:?}",
                decision.doc_id, decision.kept, decision.candidates
            );
            out.decisions.push(decision);
        }
        out.documents.push(group.swap_remove(0));
    }
    Ok(out)
}
