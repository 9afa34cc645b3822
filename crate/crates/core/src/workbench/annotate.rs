use serde::{Deserialize, Serialize};

use super::bundle::ModelBundle;
use crate::corpus::{CharIndex, CharSpan};
use crate::error::{Error, Result};
use crate::relation::{predict_relations, Mention, SentenceMentions};
use crate::schema::SchemaDefinition;
use crate::scheme::{encode, TagScheme, TokenSpan};
use crate::tagger::{predict, Prediction};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub text: String,
    pub sentences: Vec<SentenceResult>,
    pub concepts: Vec<ConceptResult>,
    pub relations: Vec<RelationResult>,
}

/// Offsets are code points, end-exclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceResult {
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<TokenResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenResult {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub pos: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptResult {
    pub id: String,
    #[serde(rename = "type")]
    pub concept: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub sentence: usize,
    /// Token range `[token_start, token_end)` within the sentence.
    pub token_start: usize,
    pub token_end: usize,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationResult {
    pub id: String,
    #[serde(rename = "type")]
    pub relation: String,
    pub arg1: String,
    pub arg2: String,
    pub confidence: f64,
}

/// Tokenize, tag parts of speech, detect concepts, then classify relations
/// between the detected concepts of each sentence.
pub fn annotate(bundle: &ModelBundle, schema: &SchemaDefinition, text: &str) -> Result<AnnotationResult> {
    let pos = bundle.pos.as_ref().ok_or(Error::MissingComponent("pos"))?;
    let concepts = bundle.concepts.as_ref().ok_or(Error::MissingComponent("concepts"))?;
    let relations = bundle.relations.as_ref().ok_or(Error::MissingComponent("relations"))?;
    let words = bundle.words.as_ref().ok_or(Error::MissingComponent("words"))?;
    bundle.check_schema(schema)?;
    let pos_stack = bundle.stack_for(&pos.embeddings)?;
    let concept_stack = bundle.stack_for(&concepts.embeddings)?;
    let mut pos_state = pos_stack.new_state();
    let mut concept_state = concept_stack.new_state();

    let tokenization = bundle.tokenizer.tokenize(text);
    let index = CharIndex::new(text);
    let mut out = AnnotationResult {
        text: text.to_owned(),
        ..Default::default()
    };
    for (si, (sentence, spans)) in tokenization.sentences.iter().zip(&tokenization.tokens).enumerate() {
        let strings: Vec<&str> = spans.iter().map(|t| index.slice(text, *t)).collect();
        let Prediction::Tags(tags) = predict(pos, &pos_stack, &mut pos_state, &strings)? else {
            return Err(Error::Config("the pos component is not a part-of-speech tagger".into()));
        };
        let Prediction::Spans(found) = predict(concepts, &concept_stack, &mut concept_state, &strings)? else {
            return Err(Error::Config("the concepts component is not a concept tagger".into()));
        };
        out.sentences.push(SentenceResult {
            start: sentence.start,
            end: sentence.end,
            tokens: spans
                .iter()
                .zip(&strings)
                .zip(tags)
                .map(|((t, s), pos)| TokenResult {
                    start: t.start,
                    end: t.end,
                    text: (*s).to_owned(),
                    pos,
                })
                .collect(),
        });
        let mut mentions = Vec::new();
        for sp in found {
            let id = format!("T{}", out.concepts.len() + 1);
            let chars = CharSpan::new(spans[sp.start].start, spans[sp.end - 1].end);
            mentions.push(Mention {
                id: id.clone(),
                start: sp.start,
                end: sp.end,
                concept: sp.label.clone(),
            });
            out.concepts.push(ConceptResult {
                id,
                concept: sp.label,
                start: chars.start,
                end: chars.end,
                text: index.slice(text, chars).to_owned(),
                sentence: si,
                token_start: sp.start,
                token_end: sp.end,
                confidence: sp.confidence.clamp(0.0, 1.0),
            });
        }
        let sm = SentenceMentions {
            doc_id: String::new(),
            sentence: si,
            tokens: strings.iter().map(|s| (*s).to_owned()).collect(),
            mentions,
            relations: Vec::new(),
        };
        for r in predict_relations(&relations.model, words, &sm, &relations.policy, schema, relations.threshold)? {
            out.relations.push(RelationResult {
                id: format!("R{}", out.relations.len() + 1),
                relation: r.relation,
                arg1: r.arg1,
                arg2: r.arg2,
                confidence: r.confidence,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Standoff,
    Conll,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(OutputFormat::Json),
            "standoff" => Some(OutputFormat::Standoff),
            "conll" => Some(OutputFormat::Conll),
            _ => None,
        }
    }
}

impl AnnotationResult {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `.ann` content for the annotated text.
    pub fn to_standoff(&self) -> String {
        let mut out = String::new();
        for c in &self.concepts {
            out.push_str(&format!("{}\t{} {} {}\t{}\n", c.id, c.concept, c.start, c.end, c.text));
        }
        for r in &self.relations {
            out.push_str(&format!("{}\t{} Arg1:{} Arg2:{}\t\n", r.id, r.relation, r.arg1, r.arg2));
        }
        out
    }

    /// Token, part of speech and concept tag per line; blank line between sentences.
    pub fn to_conll(&self, scheme: TagScheme) -> Result<String> {
        let mut out = String::new();
        for (si, s) in self.sentences.iter().enumerate() {
            let spans: Vec<TokenSpan> = self
                .concepts
                .iter()
                .filter(|c| c.sentence == si)
                .map(|c| TokenSpan::new(c.token_start, c.token_end, c.concept.clone()))
                .collect();
            let tags = encode(&spans, s.tokens.len(), scheme)?;
            for (t, tag) in s.tokens.iter().zip(tags) {
                out.push_str(&format!("{}\t{}\t{}\n", t.text, t.pos, tag));
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Standoff => Ok(self.to_standoff()),
            OutputFormat::Conll => self.to_conll(TagScheme::Bioes),
        }
    }
}
