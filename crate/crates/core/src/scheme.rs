//! Span ↔ per-token tag encodings (BIO and BIOES).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OUTSIDE: &str = "O";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagScheme {
    Bio,
    #[default]
    Bioes,
}

impl TagScheme {
    pub fn prefixes(self) -> &'static [char] {
        match self {
            TagScheme::Bio => &['B', 'I'],
            TagScheme::Bioes => &['B', 'I', 'E', 'S'],
        }
    }
}

/// A labelled run of tokens `[start, end)` inside one sentence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        TokenSpan {
            start,
            end,
            label: label.into(),
        }
    }
}

impl fmt::Display for TokenSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}..{})", self.label, self.start, self.end)
    }
}

/// Splits `B-Medication` into `('B', "Medication")`.
pub fn split_tag(tag: &str) -> Option<(char, &str)> {
    let (prefix, label) = tag.split_once('-')?;
    let mut chars = prefix.chars();
    let p = chars.next()?;
    (chars.next().is_none() && matches!(p, 'B' | 'I' | 'E' | 'S') && !label.is_empty())
        .then_some((p, label))
}

pub fn encode(spans: &[TokenSpan], len: usize, scheme: TagScheme) -> Result<Vec<String>> {
    let mut tags = vec![OUTSIDE.to_string(); len];
    let mut sorted: Vec<&TokenSpan> = spans.iter().collect();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::Labels(format!(
                "overlapping spans {} and {}; normalize the corpus first",
                pair[0], pair[1]
            )));
        }
    }
    for s in sorted {
        if s.start >= s.end || s.end > len {
            return Err(Error::Labels(format!("span {s} outside sentence of {len} tokens")));
        }
        for (i, tag) in tags.iter_mut().enumerate().take(s.end).skip(s.start) {
            let p = match scheme {
                TagScheme::Bio => if i == s.start { 'B' } else { 'I' },
                TagScheme::Bioes => match (i == s.start, i + 1 == s.end) {
                    (true, true) => 'S',
                    (true, false) => 'B',
                    (false, true) => 'E',
                    (false, false) => 'I',
                },
            };
            *tag = format!("{p}-{}", s.label);
        }
    }
    Ok(tags)
}

/// Reads spans back from tags, repairing invalid sequences: an `I` or `E`
/// without an open span of the same label opens one, a `B` or `S` closes
/// whatever is open. Never returns overlapping spans.
pub fn decode<S: AsRef<str>>(tags: &[S]) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let parsed = split_tag(tag.as_ref());
        let continues = matches!((parsed, open), (Some(('I' | 'E', l)), Some((_, o))) if l == o);
        if !continues {
            if let Some((start, label)) = open.take() {
                out.push(TokenSpan::new(start, i, label));
            }
        }
        match parsed {
            None => {}
            Some(('S', l)) => out.push(TokenSpan::new(i, i + 1, l)),
            Some(('E', l)) => {
                let start = open.take().map_or(i, |(s, _)| s);
                out.push(TokenSpan::new(start, i + 1, l));
            }
            Some(('B', l)) => open = Some((i, l)),
            Some((_, l)) => {
                if open.is_none() {
                    open = Some((i, l));
                }
            }
        }
    }
    if let Some((start, label)) = open {
        out.push(TokenSpan::new(start, tags.len(), label));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bioes_rules() {
        let tags = encode(
            &[TokenSpan::new(0, 1, "Medication"), TokenSpan::new(2, 5, "Treatment")],
            6,
            TagScheme::Bioes,
        )
        .unwrap();
        assert_eq!(
            tags,
            ["S-Medication", "O", "B-Treatment", "I-Treatment", "E-Treatment", "O"]
        );
        assert_eq!(encode(&[], 3, TagScheme::Bioes).unwrap(), ["O", "O", "O"]);
    }

    #[test]
    fn overlap_rejected() {
        let err = encode(
            &[TokenSpan::new(0, 3, "A"), TokenSpan::new(2, 4, "B")],
            5,
            TagScheme::Bioes,
        )
        .unwrap_err();
        assert!(err.to_string().contains("normalize"));
    }

    #[test]
    fn repair() {
        assert_eq!(decode(&["O", "I-X", "E-X"]), vec![TokenSpan::new(1, 3, "X")]);
        assert_eq!(decode(&["E-X"]), vec![TokenSpan::new(0, 1, "X")]);
        assert_eq!(
            decode(&["B-X", "I-Y", "O"]),
            vec![TokenSpan::new(0, 1, "X"), TokenSpan::new(1, 2, "Y")]
        );
        assert_eq!(decode(&["B-X", "I-X"]), vec![TokenSpan::new(0, 2, "X")]);
        assert_eq!(
            decode(&["B-X", "B-X", "S-Y"]),
            vec![TokenSpan::new(0, 1, "X"), TokenSpan::new(1, 2, "X"), TokenSpan::new(2, 3, "Y")]
        );
        assert!(decode::<&str>(&[]).is_empty());
    }

    fn arb_spans() -> impl Strategy<Value = (Vec<TokenSpan>, usize)> {
        proptest::collection::vec((0usize..3, 1usize..4, 0usize..3), 0..6).prop_map(|parts| {
            let mut spans = Vec::new();
            let mut pos = 0;
            for (gap, len, label) in parts {
                pos += gap;
                spans.push(TokenSpan::new(pos, pos + len, ["A", "B", "C"][label]));
                pos += len;
            }
            (spans, pos + 1)
        })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode((spans, len) in arb_spans(), bio in any::<bool>()) {
            let scheme = if bio { TagScheme::Bio } else { TagScheme::Bioes };
            let tags = encode(&spans, len, scheme).unwrap();
            prop_assert_eq!(decode(&tags), spans);
        }

        #[test]
        fn repair_never_overlaps(tags in proptest::collection::vec(
            prop_oneof![Just("O".to_string()), "[BIES]-[XY]"], 0..12)) {
            let spans = decode(&tags);
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            for s in &spans {
                prop_assert!(s.start < s.end && s.end <= tags.len());
            }
        }
    }
}
