use serde::{Deserialize, Serialize};

use super::scores::{prf_scores, EvalReport, MatchCounts};
use crate::corpus::CharSpan;

/// Label of candidate pairs that are not related.
pub const NO_RELATION: &str = "NO_RELATION";

/// Gold and predicted label for one candidate pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPair {
    pub gold: String,
    pub predicted: String,
}

/// Scores candidate classifications per relation type. `NO_RELATION` never
/// appears as a class; `uncovered_gold` lists gold relations that no
/// candidate represented (they count as false negatives).
pub fn evaluate_relations<S: AsRef<str>>(
    relation_types: &[S],
    outcomes: &[LabelPair],
    uncovered_gold: &[String],
) -> EvalReport {
    let mut counts = MatchCounts::default();
    for t in relation_types {
        counts.declare(t.as_ref());
    }
    for o in outcomes {
        if o.gold == o.predicted {
            if o.gold != NO_RELATION {
                counts.class_mut(&o.gold).tp += 1;
            }
            continue;
        }
        if o.predicted != NO_RELATION {
            counts.class_mut(&o.predicted).fp += 1;
        }
        if o.gold != NO_RELATION {
            counts.class_mut(&o.gold).fn_ += 1;
        }
    }
    for g in uncovered_gold {
        counts.class_mut(g).fn_ += 1;
    }
    prf_scores(&counts)
}

/// A relation identified by its argument extents, for end-to-end scoring
/// against predicted concepts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundedRelation {
    pub relation: String,
    pub arg1: CharSpan,
    pub arg2: CharSpan,
}

/// Exact matching of relation type and both argument extents.
pub fn evaluate_grounded_relations<S: AsRef<str>>(
    relation_types: &[S],
    gold: &[GroundedRelation],
    pred: &[GroundedRelation],
) -> EvalReport {
    let mut counts = MatchCounts::default();
    for t in relation_types {
        counts.declare(t.as_ref());
    }
    let mut used = vec![false; pred.len()];
    for g in gold {
        match pred.iter().enumerate().find(|(i, p)| !used[*i] && *p == g) {
            Some((i, _)) => {
                used[i] = true;
                counts.class_mut(&g.relation).tp += 1;
            }
            None => counts.class_mut(&g.relation).fn_ += 1,
        }
    }
    for (p, u) in pred.iter().zip(used) {
        if !u {
            counts.class_mut(&p.relation).fp += 1;
        }
    }
    prf_scores(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::SchemaDefinition;

    fn pair(g: &str, p: &str) -> LabelPair {
        LabelPair {
            gold: g.into(),
            predicted: p.into(),
        }
    }

    fn types() -> Vec<String> {
        SchemaDefinition::shipped().relations().iter().map(|r| r.name.clone()).collect()
    }

    #[test]
    fn all_correct() {
        let r = evaluate_relations(
            &types(),
            &[pair("Has_dosing", "Has_dosing"), pair(NO_RELATION, NO_RELATION)],
            &[],
        );
        assert_eq!(r.micro.f1, 1.0);
        assert!(r.class(NO_RELATION).is_none());
    }

    #[test]
    fn missed_dosing() {
        let r = evaluate_relations(&types(), &[pair("Has_dosing", NO_RELATION)], &[]);
        let c = r.counts.per_class["Has_dosing"];
        assert_eq!((c.tp, c.fp, c.fn_), (0, 0, 1));
    }

    #[test]
    fn rows_cover_every_relation_type() {
        let r = evaluate_relations(&types(), &[pair("Shows", "Examines")], &["Involves".to_string()]);
        assert_eq!(r.classes.len(), 9);
        assert_eq!(r.counts.per_class["Examines"].fp, 1);
        assert_eq!(r.counts.per_class["Shows"].fn_, 1);
        assert_eq!(r.counts.per_class["Involves"].fn_, 1);
    }

    #[test]
    fn grounded() {
        let rel = |t: &str, a: usize| GroundedRelation {
            relation: t.into(),
            arg1: CharSpan::new(a, a + 2),
            arg2: CharSpan::new(a + 3, a + 5),
        };
        let r = evaluate_grounded_relations(&types(), &[rel("Shows", 0), rel("Shows", 10)], &[rel("Shows", 0), rel("Shows", 11)]);
        let c = r.counts.micro();
        assert_eq!((c.tp, c.fp, c.fn_), (1, 1, 1));
    }
}
