use serde::{Deserialize, Serialize};

use super::scores::MatchCounts;
use crate::corpus::{AnnotatedDocument, CharSpan};

/// A single-fragment typed span.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl LabeledSpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        LabeledSpan {
            start,
            end,
            label: label.into(),
        }
    }

    fn range(&self) -> CharSpan {
        CharSpan::new(self.start, self.end)
    }

    /// Envelopes of the document's concept annotations.
    pub fn from_document(doc: &AnnotatedDocument) -> Vec<LabeledSpan> {
        doc.spans
            .iter()
            .map(|s| {
                let e = s.envelope();
                LabeledSpan::new(e.start, e.end, s.concept.clone())
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Strict,
    Lenient,
}

/// How lenient matching pairs overlapping spans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LenientStrategy {
    /// Pairs are taken in order of decreasing overlap (then gold start, then
    /// predicted start), each span used at most once.
    Greedy,
    /// The greedy pairing extended by augmenting paths to a maximum
    /// one-to-one matching.
    #[default]
    Maximum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub mode: MatchMode,
    /// Lenient mode only: whether overlapping spans must share a label.
    pub require_same_type: bool,
    pub strategy: LenientStrategy,
}

impl MatchConfig {
    pub fn new(mode: MatchMode) -> Self {
        MatchConfig {
            mode,
            require_same_type: true,
            strategy: LenientStrategy::Maximum,
        }
    }
}

pub fn match_spans(gold: &[LabeledSpan], pred: &[LabeledSpan], mode: MatchMode) -> MatchCounts {
    match_spans_with(gold, pred, &MatchConfig::new(mode))
}

pub fn match_spans_with(gold: &[LabeledSpan], pred: &[LabeledSpan], config: &MatchConfig) -> MatchCounts {
    let compatible = |g: &LabeledSpan, p: &LabeledSpan| match config.mode {
        MatchMode::Strict => g == p,
        MatchMode::Lenient => {
            g.range().overlap(&p.range()) > 0 && (!config.require_same_type || g.label == p.label)
        }
    };
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (gi, g) in gold.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            if compatible(g, p) {
                edges.push((gi, pi));
            }
        }
    }
    edges.sort_by(|&(ga, pa), &(gb, pb)| {
        let oa = gold[ga].range().overlap(&pred[pa].range());
        let ob = gold[gb].range().overlap(&pred[pb].range());
        ob.cmp(&oa)
            .then(gold[ga].start.cmp(&gold[gb].start))
            .then(pred[pa].start.cmp(&pred[pb].start))
            .then(ga.cmp(&gb))
            .then(pa.cmp(&pb))
    });

    let mut gold_match: Vec<Option<usize>> = vec![None; gold.len()];
    let mut pred_match: Vec<Option<usize>> = vec![None; pred.len()];
    for &(g, p) in &edges {
        if gold_match[g].is_none() && pred_match[p].is_none() {
            gold_match[g] = Some(p);
            pred_match[p] = Some(g);
        }
    }
    if config.mode == MatchMode::Lenient && config.strategy == LenientStrategy::Maximum {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); gold.len()];
        for &(g, p) in &edges {
            adj[g].push(p);
        }
        for g in 0..gold.len() {
            if gold_match[g].is_none() {
                let mut seen = vec![false; pred.len()];
                augment(g, &adj, &mut gold_match, &mut pred_match, &mut seen);
            }
        }
    }

    let mut counts = MatchCounts::default();
    for (g, m) in gold.iter().zip(&gold_match) {
        let c = counts.class_mut(&g.label);
        match m {
            Some(_) => c.tp += 1,
            None => c.fn_ += 1,
        }
    }
    for (p, m) in pred.iter().zip(&pred_match) {
        if m.is_none() {
            counts.class_mut(&p.label).fp += 1;
        }
    }
    counts
}

fn augment(
    g: usize,
    adj: &[Vec<usize>],
    gold_match: &mut [Option<usize>],
    pred_match: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for &p in &adj[g] {
        if seen[p] {
            continue;
        }
        seen[p] = true;
        let free = match pred_match[p] {
            None => true,
            Some(other) => augment(other, adj, gold_match, pred_match, seen),
        };
        if free {
            gold_match[g] = Some(p);
            pred_match[p] = Some(g);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::prf_scores;

    fn s(start: usize, end: usize, label: &str) -> LabeledSpan {
        LabeledSpan::new(start, end, label)
    }

    #[test]
    fn identical_sets() {
        let g = vec![s(0, 4, "A"), s(5, 9, "B")];
        for mode in [MatchMode::Strict, MatchMode::Lenient] {
            let c = match_spans(&g, &g, mode).micro();
            assert_eq!((c.fp, c.fn_), (0, 0));
            assert_eq!(c.f1(), 1.0);
        }
    }

    #[test]
    fn boundary_disagreement() {
        let g = vec![s(0, 10, "Medication")];
        let p = vec![s(0, 12, "Medication")];
        let strict = match_spans(&g, &p, MatchMode::Strict).micro();
        assert_eq!((strict.tp, strict.fp, strict.fn_), (0, 1, 1));
        let lenient = match_spans(&g, &p, MatchMode::Lenient).micro();
        assert_eq!((lenient.tp, lenient.fp, lenient.fn_), (1, 0, 0));
    }

    #[test]
    fn type_confusion() {
        let g = vec![s(0, 5, "A"), s(6, 9, "B")];
        let p = vec![s(0, 5, "A"), s(6, 9, "A")];
        let c = match_spans(&g, &p, MatchMode::Strict);
        let m = c.micro();
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 1));
        let r = prf_scores(&c);
        assert_eq!((r.micro.precision, r.micro.recall, r.micro.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn untyped_lenient_switch() {
        let g = vec![s(0, 5, "A")];
        let p = vec![s(2, 7, "B")];
        let mut cfg = MatchConfig::new(MatchMode::Lenient);
        assert_eq!(match_spans_with(&g, &p, &cfg).micro().tp, 0);
        cfg.require_same_type = false;
        assert_eq!(match_spans_with(&g, &p, &cfg).micro().tp, 1);
    }

    #[test]
    fn greedy_can_fall_short_of_maximum() {
        // The largest overlap pairs g0 with p0 and strands both g1 and p1.
        let g = vec![s(0, 10, "X"), s(10, 12, "X")];
        let p = vec![s(2, 11, "X"), s(0, 2, "X")];
        let mut cfg = MatchConfig::new(MatchMode::Lenient);
        assert_eq!(match_spans_with(&g, &p, &cfg).micro().tp, 2);
        cfg.strategy = LenientStrategy::Greedy;
        assert_eq!(match_spans_with(&g, &p, &cfg).micro().tp, 1);
    }
}
