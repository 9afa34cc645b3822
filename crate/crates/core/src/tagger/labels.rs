use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::crf::{start_state, stop_state, FORBIDDEN};
use crate::error::{Error, Result};
use crate::schema::SchemaDefinition;
use crate::scheme::{self, split_tag, TagScheme, TokenSpan, OUTSIDE};

/// Ordered label set with an index map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelVocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for LabelVocab {
    fn from(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        LabelVocab { labels, index }
    }
}

impl From<LabelVocab> for Vec<String> {
    fn from(v: LabelVocab) -> Self {
        v.labels
    }
}

impl LabelVocab {
    /// `O` followed by every scheme prefix for every concept type, in schema order.
    pub fn for_concepts(schema: &SchemaDefinition, scheme: TagScheme) -> Self {
        let mut labels = vec![OUTSIDE.to_owned()];
        for c in schema.concept_names() {
            for p in scheme.prefixes() {
                labels.push(format!("{p}-{c}"));
            }
        }
        labels.into()
    }

    /// Sorted distinct tags, as used for part-of-speech labels.
    pub fn from_tags<'a>(tags: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = tags.into_iter().collect();
        set.into_iter().map(str::to_owned).collect::<Vec<_>>().into()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn encode(&self, tags: &[String]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| self.index(t).ok_or_else(|| Error::Labels(format!("unknown label {t:?}"))))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.labels[i].clone()).collect()
    }

    /// Initial transition matrix: zero for allowed moves, [`FORBIDDEN`] for
    /// moves the scheme rules out. Labels without a span prefix (such as
    /// part-of-speech tags) are unconstrained.
    pub fn initial_transitions(&self, scheme: TagScheme) -> Array2<f64> {
        let l = self.len();
        let mut t = Array2::zeros((l + 2, l + 2));
        let parsed: Vec<Option<(char, &str)>> = self.labels.iter().map(|s| split_tag(s)).collect();
        if parsed.iter().all(Option::is_none) {
            return t;
        }
        let allowed = |prev: Option<(char, &str)>, prev_is_start: bool, next: Option<(char, &str)>, next_is_stop: bool| {
            let open = match prev {
                Some(('B', l)) | Some(('I', l)) if !prev_is_start => Some(l),
                _ => None,
            };
            match scheme {
                TagScheme::Bioes => match (open, next) {
                    (Some(l), Some(('I', n))) | (Some(l), Some(('E', n))) => l == n && !next_is_stop,
                    (Some(_), _) => false,
                    (None, Some(('I', _))) | (None, Some(('E', _))) => false,
                    (None, _) => true,
                },
                TagScheme::Bio => match next {
                    Some(('I', n)) if !next_is_stop => open == Some(n),
                    _ => true,
                },
            }
        };
        for i in 0..l + 1 {
            let (prev, is_start) = if i == l { (None, true) } else { (parsed[i], false) };
            for j in (0..l).chain([l + 1]) {
                let (next, is_stop) = if j == l + 1 { (None, true) } else { (parsed[j], false) };
                if !allowed(prev, is_start, next, is_stop) {
                    t[[i, j]] = FORBIDDEN;
                }
            }
        }
        // Nothing enters the start state or leaves the stop state.
        for k in 0..l + 2 {
            t[[k, start_state(l)]] = FORBIDDEN;
            t[[stop_state(l), k]] = FORBIDDEN;
        }
        t
    }
}

/// Tags for one sentence from non-overlapping token spans.
pub fn encode_labels(spans: &[TokenSpan], len: usize, scheme: TagScheme) -> Result<Vec<String>> {
    scheme::encode(spans, len, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concept_vocab_shape() {
        let v = LabelVocab::for_concepts(&SchemaDefinition::shipped(), TagScheme::Bioes);
        assert_eq!(v.len(), 1 + 4 * 17);
        assert_eq!(v.index("O"), Some(0));
        assert_eq!(v.label(v.index("S-Medication").unwrap()), "S-Medication");
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<LabelVocab>(&json).unwrap(), v);
    }

    #[test]
    fn bioes_constraints() {
        let v: LabelVocab = vec!["O", "B-X", "I-X", "E-X", "S-X", "B-Y", "E-Y"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
            .into();
        let t = v.initial_transitions(TagScheme::Bioes);
        let ix = |s: &str| v.index(s).unwrap();
        let (start, stop) = (7, 8);
        assert_eq!(t[[ix("B-X"), ix("I-X")]], 0.0);
        assert_eq!(t[[ix("B-X"), ix("E-Y")]], FORBIDDEN);
        assert_eq!(t[[ix("O"), ix("I-X")]], FORBIDDEN);
        assert_eq!(t[[start, ix("E-X")]], FORBIDDEN);
        assert_eq!(t[[start, ix("S-X")]], 0.0);
        assert_eq!(t[[ix("I-X"), stop]], FORBIDDEN);
        assert_eq!(t[[ix("E-X"), ix("B-Y")]], 0.0);
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_labels(&[], 3, TagScheme::Bioes).unwrap(), ["O", "O", "O"]);
        assert_eq!(
            encode_labels(&[TokenSpan::new(0, 3, "Treatment")], 3, TagScheme::Bioes).unwrap(),
            ["B-Treatment", "I-Treatment", "E-Treatment"]
        );
    }
}
