//! Pairwise inter-annotator agreement as character-level micro F1.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::scores::ClassCounts;
use crate::corpus::AnnotatedDocument;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotator_a: String,
    pub annotator_b: String,
    pub shared_documents: usize,
    pub concepts: ClassCounts,
    pub relations: ClassCounts,
}

impl PairAgreement {
    pub fn concept_f1(&self) -> f64 {
        self.concepts.f1()
    }

    /// `None` when neither annotator marked a relation in the shared documents.
    pub fn relation_f1(&self) -> Option<f64> {
        (self.relations != ClassCounts::default()).then(|| self.relations.f1())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IaaReport {
    pub pairs: Vec<PairAgreement>,
    /// Unweighted mean of concept F1 over pairs.
    pub concept_f1: f64,
    /// Unweighted mean over pairs with relation annotations.
    pub relation_f1: Option<f64>,
    /// Annotator pairs without shared documents.
    pub notices: Vec<String>,
}

impl IaaReport {
    /// F1 of the pair, in either order.
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairAgreement> {
        self.pairs.iter().find(|p| {
            (p.annotator_a == a && p.annotator_b == b) || (p.annotator_a == b && p.annotator_b == a)
        })
    }
}

type Item<'a> = (usize, &'a str, u8);

fn concept_items(doc: &AnnotatedDocument) -> HashSet<Item<'_>> {
    let mut items = HashSet::new();
    for s in &doc.spans {
        for f in &s.fragments {
            for pos in f.start..f.end {
                items.insert((pos, s.concept.as_str(), 0));
            }
        }
    }
    items
}

/// Relations projected onto the characters of their arguments, keyed by
/// relation type and argument role.
fn relation_items(doc: &AnnotatedDocument) -> HashSet<Item<'_>> {
    let mut items = HashSet::new();
    for r in &doc.relations {
        for (role, arg) in [(1u8, &r.arg1), (2u8, &r.arg2)] {
            if let Some(span) = doc.span(arg) {
                for f in &span.fragments {
                    for pos in f.start..f.end {
                        items.insert((pos, r.relation.as_str(), role));
                    }
                }
            }
        }
    }
    items
}

fn compare(reference: &HashSet<Item<'_>>, other: &HashSet<Item<'_>>) -> ClassCounts {
    let tp = reference.intersection(other).count() as u64;
    ClassCounts::new(tp, other.len() as u64 - tp, reference.len() as u64 - tp)
}

/// Agreement between every pair of annotators over the documents they share.
///
/// `versions` holds every annotator's copy of every document; `annotator_id`
/// and `doc_id` identify them.
pub fn char_level_iaa(versions: &[AnnotatedDocument]) -> IaaReport {
    let mut by_annotator: BTreeMap<&str, BTreeMap<&str, &AnnotatedDocument>> = BTreeMap::new();
    for v in versions {
        by_annotator
            .entry(v.annotator_id.as_str())
            .or_default()
            .insert(v.doc_id.as_str(), v);
    }
    let annotators: Vec<&str> = by_annotator.keys().copied().collect();

    let mut report = IaaReport::default();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let docs_a = &by_annotator[a];
            let docs_b = &by_annotator[b];
            let mut pair = PairAgreement {
                annotator_a: a.to_string(),
                annotator_b: b.to_string(),
                shared_documents: 0,
                concepts: ClassCounts::default(),
                relations: ClassCounts::default(),
            };
            for (doc_id, da) in docs_a {
                let Some(db) = docs_b.get(doc_id) else { continue };
                pair.shared_documents += 1;
                pair.concepts.add(compare(&concept_items(da), &concept_items(db)));
                pair.relations.add(compare(&relation_items(da), &relation_items(db)));
            }
            if pair.shared_documents == 0 {
                report
                    .notices
                    .push(format!("annotators {a} and {b} share no documents; pair omitted"));
                continue;
            }
            report.pairs.push(pair);
        }
    }

    if !report.pairs.is_empty() {
        report.concept_f1 =
            report.pairs.iter().map(PairAgreement::concept_f1).sum::<f64>() / report.pairs.len() as f64;
    }
    let rel: Vec<f64> = report.pairs.iter().filter_map(PairAgreement::relation_f1).collect();
    if !rel.is_empty() {
        report.relation_f1 = Some(rel.iter().sum::<f64>() / rel.len() as f64);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CharSpan, RelationAnnotation, SpanAnnotation};

    fn version(annotator: &str, doc: &str, spans: &[(usize, usize, &str)]) -> AnnotatedDocument {
        let text = "x".repeat(20);
        let mut d = AnnotatedDocument::new(doc, text);
        d.annotator_id = annotator.into();
        for (i, (s, e, c)) in spans.iter().enumerate() {
            d.spans.push(SpanAnnotation {
                id: format!("T{}", i + 1),
                concept: c.to_string(),
                fragments: vec![CharSpan::new(*s, *e)],
                surface: "x".repeat(e - s),
            });
        }
        d
    }

    #[test]
    fn identical_and_disjoint() {
        let same = char_level_iaa(&[version("a", "d", &[(0, 5, "X")]), version("b", "d", &[(0, 5, "X")])]);
        assert_eq!(same.concept_f1, 1.0);
        let disjoint =
            char_level_iaa(&[version("a", "d", &[(0, 5, "X")]), version("b", "d", &[(10, 15, "X")])]);
        assert_eq!(disjoint.concept_f1, 0.0);
    }

    #[test]
    fn half_overlap() {
        let r = char_level_iaa(&[version("A", "d", &[(0, 10, "X")]), version("B", "d", &[(5, 15, "X")])]);
        let p = &r.pairs[0];
        assert_eq!(p.concepts, ClassCounts::new(5, 5, 5));
        assert_eq!(p.concept_f1(), 0.5);
    }

    #[test]
    fn type_mismatch_disagrees() {
        let r = char_level_iaa(&[version("a", "d", &[(0, 5, "X")]), version("b", "d", &[(0, 5, "Y")])]);
        assert_eq!(r.concept_f1, 0.0);
    }

    #[test]
    fn unshared_pair_omitted() {
        let r = char_level_iaa(&[
            version("a", "d1", &[(0, 5, "X")]),
            version("b", "d1", &[(0, 5, "X")]),
            version("c", "d2", &[(0, 5, "X")]),
        ]);
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.notices.len(), 2);
    }

    #[test]
    fn symmetric_under_swap() {
        let a = version("a", "d", &[(0, 10, "X"), (12, 14, "Y")]);
        let b = version("b", "d", &[(3, 11, "X"), (12, 16, "Y")]);
        let ab = char_level_iaa(&[a.clone(), b.clone()]);
        // Renaming flips which annotator is the reference.
        let mut a2 = a;
        a2.annotator_id = "z".into();
        let ba = char_level_iaa(&[b, a2]);
        assert_eq!(ab.concept_f1, ba.concept_f1);
        assert_eq!(ab.pairs[0].concepts.tp, ba.pairs[0].concepts.tp);
        assert_eq!(ab.pairs[0].concepts.fp, ba.pairs[0].concepts.fn_);
    }

    #[test]
    fn relation_projection() {
        let rel = |d: &mut AnnotatedDocument, ty: &str| {
            d.relations.push(RelationAnnotation {
                id: "R1".into(),
                relation: ty.into(),
                arg1: "T1".into(),
                arg2: "T2".into(),
            })
        };
        let mut a = version("a", "d", &[(0, 4, "Medication"), (5, 9, "Dosing")]);
        let mut b = a.clone();
        b.annotator_id = "b".into();
        rel(&mut a, "Has_dosing");
        rel(&mut b, "Has_dosing");
        assert_eq!(char_level_iaa(&[a.clone(), b.clone()]).relation_f1, Some(1.0));
        b.relations[0].relation = "Involves".into();
        assert_eq!(char_level_iaa(&[a, b]).relation_f1, Some(0.0));
    }
}
