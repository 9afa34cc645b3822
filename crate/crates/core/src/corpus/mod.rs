//! Annotated documents in standoff form, plus the tooling that turns raw
//! annotator output into a training corpus.

mod conll;
mod layout;
mod merge;
mod normalize;
mod standoff;
mod tokenize;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::AttributeFamily;

pub use conll::{export_conll, import_conll_spans, read_conll, ConllDocument, ConllToken};
pub use layout::{read_corpus_dir, write_corpus_dir, write_document};
pub use merge::{merge_annotators, MergeDecision, MergeOutcome};
pub use normalize::{
    normalize_document, CollapseDiscontinuous, ConceptFrequencies, NormalizationPolicy,
    NormalizationReport,
};
pub use standoff::{export_standoff, parse_standoff, ParseOutcome, StandoffParser, UnknownNames};
pub use tokenize::{tokenize, Tokenization, Tokenizer};

/// Half-open range of Unicode code points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        CharSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &CharSpan) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn contains(&self, other: &CharSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocType {
    #[default]
    ClinicalNote,
    DischargeSummary,
}

impl DocType {
    pub fn as_str(self) -> &'static str {
        match self {
            DocType::ClinicalNote => "clinical_note",
            DocType::DischargeSummary => "discharge_summary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clinical_note" => Some(DocType::ClinicalNote),
            "discharge_summary" => Some(DocType::DischargeSummary),
            _ => None,
        }
    }
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub id: String,
    pub concept: String,
    pub fragments: Vec<CharSpan>,
    pub surface: String,
}

impl SpanAnnotation {
    /// Smallest range covering every fragment.
    pub fn envelope(&self) -> CharSpan {
        CharSpan::new(
            self.fragments.first().map_or(0, |f| f.start),
            self.fragments.last().map_or(0, |f| f.end),
        )
    }

    pub fn is_discontinuous(&self) -> bool {
        self.fragments.len() > 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationAnnotation {
    pub id: String,
    pub relation: String,
    pub arg1: String,
    pub arg2: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeAssignment {
    pub id: String,
    pub family: AttributeFamily,
    pub target: String,
    pub value: String,
}

/// One `.ann` line, referenced by annotation id so that the original line
/// order survives filtering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineRef {
    Span(String),
    Relation { id: String, trailing_tab: bool },
    Attribute(String),
    Verbatim(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandoffLayout {
    pub lines: Vec<LineRef>,
    pub final_newline: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub doc_type: DocType,
    pub annotator_id: String,
    pub text: String,
    pub spans: Vec<SpanAnnotation>,
    pub relations: Vec<RelationAnnotation>,
    pub attributes: Vec<AttributeAssignment>,
    pub sentences: Vec<CharSpan>,
    /// Token offsets grouped by sentence.
    pub tokens: Vec<Vec<CharSpan>>,
    /// Optional gold part-of-speech tags, grouped like `tokens`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pos: Vec<Vec<String>>,
    #[serde(default)]
    pub layout: StandoffLayout,
}

impl AnnotatedDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        AnnotatedDocument {
            doc_id: doc_id.into(),
            text: text.into(),
            ..Default::default()
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn span(&self, id: &str) -> Option<&SpanAnnotation> {
        self.spans.iter().find(|s| s.id == id)
    }

    /// Fills `sentences` and `tokens` using `tokenizer`.
    pub fn tokenize_with(&mut self, tokenizer: &Tokenizer) {
        let t = tokenizer.tokenize(&self.text);
        self.sentences = t.sentences;
        self.tokens = t.tokens;
    }

    pub fn is_tokenized(&self) -> bool {
        !self.sentences.is_empty() || self.text.trim().is_empty()
    }

    /// Token strings grouped by sentence.
    pub fn token_strings(&self) -> Vec<Vec<String>> {
        let index = CharIndex::new(&self.text);
        self.tokens
            .iter()
            .map(|s| s.iter().map(|t| index.slice(&self.text, *t).to_owned()).collect())
            .collect()
    }

    pub fn token_count(&self) -> usize {
        self.tokens.iter().map(Vec::len).sum()
    }
}

/// Maps code-point offsets to byte offsets.
pub struct CharIndex {
    bytes: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharIndex { bytes }
    }

    pub fn char_len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn slice<'a>(&self, text: &'a str, span: CharSpan) -> &'a str {
        &text[self.bytes[span.start]..self.bytes[span.end]]
    }
}

/// Token-index range `[first, last)` of the tokens in `sentence` overlapping `span`.
pub(crate) fn token_range(tokens: &[CharSpan], span: CharSpan) -> Option<(usize, usize)> {
    let first = tokens.iter().position(|t| t.overlap(&span) > 0)?;
    let last = tokens.iter().rposition(|t| t.overlap(&span) > 0)?;
    Some((first, last + 1))
}
