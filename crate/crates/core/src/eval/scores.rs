use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ClassCounts { tp, fp, fn_ }
    }

    pub fn add(&mut self, other: ClassCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2TP / (2TP + FP + FN)`, which equals `2PR / (P + R)` and is 0 when both are 0.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class true/false positive and false negative counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub per_class: BTreeMap<String, ClassCounts>,
}

impl MatchCounts {
    pub fn class_mut(&mut self, name: &str) -> &mut ClassCounts {
        if !self.per_class.contains_key(name) {
            self.per_class.insert(name.to_owned(), ClassCounts::default());
        }
        self.per_class.get_mut(name).unwrap()
    }

    /// Ensures a row exists for `name`, even with zero counts.
    pub fn declare(&mut self, name: &str) {
        self.class_mut(name);
    }

    pub fn micro(&self) -> ClassCounts {
        let mut total = ClassCounts::default();
        for c in self.per_class.values() {
            total.add(*c);
        }
        total
    }

    pub fn merge(&mut self, other: &MatchCounts) {
        for (k, v) in &other.per_class {
            self.class_mut(k).add(*v);
        }
    }

    /// Counts with classes and `tp`/`fp`/`fn` mirrored: what scoring the
    /// prediction against the gold standard looks like from the other side.
    pub fn swapped(&self) -> MatchCounts {
        MatchCounts {
            per_class: self
                .per_class
                .iter()
                .map(|(k, c)| (k.clone(), ClassCounts::new(c.tp, c.fn_, c.fp)))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassRecord>,
    pub micro: Scores,
    /// Unweighted mean over classes with non-zero support.
    #[serde(rename = "macro")]
    pub macro_: Scores,
    pub counts: MatchCounts,
}

pub fn prf_scores(counts: &MatchCounts) -> EvalReport {
    let classes: Vec<ClassRecord> = counts
        .per_class
        .iter()
        .map(|(name, c)| ClassRecord {
            name: name.clone(),
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            support: c.support(),
        })
        .collect();
    let micro = counts.micro();
    let supported: Vec<&ClassRecord> = classes.iter().filter(|c| c.support > 0).collect();
    let mean = |f: fn(&ClassRecord) -> f64| {
        if supported.is_empty() {
            0.0
        } else {
            supported.iter().map(|c| f(c)).sum::<f64>() / supported.len() as f64
        }
    };
    EvalReport {
        micro: Scores {
            precision: micro.precision(),
            recall: micro.recall(),
            f1: micro.f1(),
        },
        macro_: Scores {
            precision: mean(|c| c.precision),
            recall: mean(|c| c.recall),
            f1: mean(|c| c.f1),
        },
        classes,
        counts: counts.clone(),
    }
}

impl EvalReport {
    pub fn class(&self, name: &str) -> Option<&ClassRecord> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Aligned plain-text table: aggregates first, then classes by support.
    pub fn to_table(&self) -> String {
        let width = self
            .classes
            .iter()
            .map(|c| c.name.len())
            .chain([14])
            .max()
            .unwrap_or(14);
        let mut out = String::new();
        writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}", "Name", "Prec.", "Rec.", "F1", "#").unwrap();
        for (label, s) in [("Micro F1-Score", self.micro), ("Macro F1-Score", self.macro_)] {
            writeln!(
                out,
                "{label:<width$}  {:>6.2}  {:>6.2}  {:>6.2}  {:>6}",
                100.0 * s.precision,
                100.0 * s.recall,
                100.0 * s.f1,
                ""
            )
            .unwrap();
        }
        let mut rows: Vec<&ClassRecord> = self.classes.iter().collect();
        rows.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.name.cmp(&b.name)));
        for c in rows {
            writeln!(
                out,
                "{:<width$}  {:>6.2}  {:>6.2}  {:>6.2}  {:>6}",
                c.name,
                100.0 * c.precision,
                100.0 * c.recall,
                100.0 * c.f1,
                c.support
            )
            .unwrap();
        }
        out
    }

    /// One JSON object per line: `name`, `precision`, `recall`, `f1`, `support`.
    pub fn to_jsonl(&self) -> String {
        self.classes
            .iter()
            .map(|c| serde_json::to_string(c).unwrap() + "\n")
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation (divides by n).
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Mean ± std of micro precision, recall and F1 across folds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

pub fn summarize_folds(folds: &[MatchCounts]) -> FoldSummary {
    let reports: Vec<EvalReport> = folds.iter().map(prf_scores).collect();
    let collect = |f: fn(&EvalReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    FoldSummary {
        precision: MeanStd::of(&collect(|r| r.micro.precision)),
        recall: MeanStd::of(&collect(|r| r.micro.recall)),
        f1: MeanStd::of(&collect(|r| r.micro.f1)),
    }
}

/// Fraction of positions where the tags agree; 1.0 for empty input.
pub fn token_accuracy<S: PartialEq>(gold: &[S], pred: &[S]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch(gold.len(), pred.len()));
    }
    if gold.is_empty() {
        return Ok(1.0);
    }
    let same = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(same as f64 / gold.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_thirds() {
        let c = ClassCounts::new(2, 1, 1);
        assert!((c.precision() - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.recall() - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.f1() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{:.3}", c.f1()), "0.667");
    }

    #[test]
    fn zero_counts() {
        let c = ClassCounts::default();
        assert_eq!((c.precision(), c.recall(), c.f1()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn f1_is_harmonic_mean() {
        for (tp, fp, fn_) in [(3, 1, 5), (7, 0, 2), (1, 9, 0)] {
            let c = ClassCounts::new(tp, fp, fn_);
            let (p, r) = (c.precision(), c.recall());
            assert!((c.f1() - 2.0 * p * r / (p + r)).abs() < 1e-12);
        }
    }

    #[test]
    fn macro_over_supported_classes() {
        let mut m = MatchCounts::default();
        *m.class_mut("A") = ClassCounts::new(1, 0, 0);
        *m.class_mut("B") = ClassCounts::new(0, 1, 1);
        m.declare("C");
        let r = prf_scores(&m);
        assert!((r.macro_.f1 - 0.5).abs() < 1e-12);
        assert_eq!(r.classes.len(), 3);
        assert_eq!(r.micro.f1, ClassCounts::new(1, 1, 1).f1());
    }

    #[test]
    fn accuracy() {
        assert_eq!(token_accuracy(&["a", "b"], &["a", "b"]).unwrap(), 1.0);
        assert_eq!(token_accuracy(&["a", "b", "c", "d"], &["a", "b", "c", "x"]).unwrap(), 0.75);
        assert_eq!(token_accuracy::<&str>(&[], &[]).unwrap(), 1.0);
        assert!(token_accuracy(&["a"], &[]).is_err());
    }

    #[test]
    fn population_std() {
        let s = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }

    #[test]
    fn report_formats() {
        let mut m = MatchCounts::default();
        *m.class_mut("Medication") = ClassCounts::new(9, 1, 0);
        let r = prf_scores(&m);
        assert!(r.to_table().contains("Micro F1-Score"));
        let line = r.to_jsonl();
        assert!(line.starts_with("{\"name\":\"Medication\",\"precision\":0.9,\"recall\":1.0,"));
    }
}
