use std::fmt::Write as _;

use super::{token_range, AnnotatedDocument, CharIndex, CharSpan, SpanAnnotation};
use crate::error::{Error, Result};
use crate::scheme::{self, TagScheme, TokenSpan};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConllToken {
    pub form: String,
    pub pos: String,
    pub tag: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConllDocument {
    pub doc_id: Option<String>,
    pub sentences: Vec<Vec<ConllToken>>,
}

/// Per-sentence token spans of the document's concept annotations.
pub(crate) fn sentence_token_spans(doc: &AnnotatedDocument) -> Result<Vec<Vec<TokenSpan>>> {
    let mut out = vec![Vec::new(); doc.sentences.len()];
    for s in &doc.spans {
        if s.is_discontinuous() {
            return Err(Error::Conll(format!(
                "span {} in {} is discontinuous",
                s.id, doc.doc_id
            )));
        }
        let env = s.envelope();
        let Some(si) = doc.sentences.iter().position(|sent| sent.contains(&env)) else {
            return Err(Error::Conll(format!(
                "span {} in {} crosses a sentence boundary",
                s.id, doc.doc_id
            )));
        };
        let Some((a, b)) = token_range(&doc.tokens[si], env) else {
            return Err(Error::Conll(format!("span {} covers no token", s.id)));
        };
        out[si].push(TokenSpan::new(a, b, s.concept.clone()));
    }
    Ok(out)
}

/// Three tab-separated columns (FORM, POS, concept tag) under a `#doc` header.
pub fn export_conll(doc: &AnnotatedDocument, scheme: TagScheme) -> Result<String> {
    if doc.sentences.is_empty() {
        return Ok(String::new());
    }
    let spans = sentence_token_spans(doc)?;
    let forms = doc.token_strings();
    let mut out = format!("#doc {}\n", doc.doc_id);
    for (si, sentence) in forms.iter().enumerate() {
        let tags = scheme::encode(&spans[si], sentence.len(), scheme)?;
        for (ti, (form, tag)) in sentence.iter().zip(&tags).enumerate() {
            let pos = doc
                .pos
                .get(si)
                .and_then(|p| p.get(ti))
                .map_or("_", String::as_str);
            writeln!(out, "{form}\t{pos}\t{tag}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Reads CoNLL text. Two-column lines (FORM, POS) are accepted and tagged `O`.
pub fn read_conll(text: &str) -> Result<Vec<ConllDocument>> {
    let mut docs = Vec::new();
    let mut current = ConllDocument::default();
    let mut sentence = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(id) = line.strip_prefix("#doc ") {
            if !sentence.is_empty() {
                current.sentences.push(std::mem::take(&mut sentence));
            }
            if current.doc_id.is_some() || !current.sentences.is_empty() {
                docs.push(std::mem::take(&mut current));
            }
            current.doc_id = Some(id.trim().to_owned());
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !sentence.is_empty() {
                current.sentences.push(std::mem::take(&mut sentence));
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (form, pos, tag) = match cols[..] {
            [f, p, t] => (f, p, t),
            [f, p] => (f, p, scheme::OUTSIDE),
            _ => {
                return Err(Error::Conll(format!(
                    "line {}: expected 2 or 3 tab-separated columns",
                    i + 1
                )))
            }
        };
        if tag != scheme::OUTSIDE && scheme::split_tag(tag).is_none() {
            return Err(Error::Conll(format!("line {}: malformed tag {tag:?}", i + 1)));
        }
        sentence.push(ConllToken {
            form: form.to_owned(),
            pos: pos.to_owned(),
            tag: tag.to_owned(),
        });
    }
    if !sentence.is_empty() {
        current.sentences.push(sentence);
    }
    if current.doc_id.is_some() || !current.sentences.is_empty() {
        docs.push(current);
    }
    Ok(docs)
}

/// Decodes the concept column of `conll` back into spans over `doc`'s tokens.
pub fn import_conll_spans(doc: &AnnotatedDocument, conll: &ConllDocument) -> Result<Vec<SpanAnnotation>> {
    if conll.sentences.len() != doc.sentences.len() {
        return Err(Error::LengthMismatch(conll.sentences.len(), doc.sentences.len()));
    }
    let index = CharIndex::new(&doc.text);
    let mut spans = Vec::new();
    for (si, sentence) in conll.sentences.iter().enumerate() {
        let tokens = &doc.tokens[si];
        if sentence.len() != tokens.len() {
            return Err(Error::LengthMismatch(sentence.len(), tokens.len()));
        }
        let tags: Vec<&str> = sentence.iter().map(|t| t.tag.as_str()).collect();
        for ts in scheme::decode(&tags) {
            let env = CharSpan::new(tokens[ts.start].start, tokens[ts.end - 1].end);
            spans.push(SpanAnnotation {
                id: format!("T{}", spans.len() + 1),
                concept: ts.label,
                fragments: vec![env],
                surface: index.slice(&doc.text, env).to_owned(),
            });
        }
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_standoff, Tokenizer};
    use crate::schema::SchemaDefinition;

    fn doc(text: &str, ann: &str) -> AnnotatedDocument {
        let mut d = parse_standoff(ann, text, &SchemaDefinition::shipped()).unwrap();
        d.doc_id = "n1".into();
        d.tokenize_with(&Tokenizer::default());
        d
    }

    #[test]
    fn two_token_medication() {
        let d = doc("Heute Prograf retard gut vertragen", "T1\tMedication 6 20\tPrograf retard\n");
        let out = export_conll(&d, TagScheme::Bioes).unwrap();
        let tags: Vec<&str> = out
            .lines()
            .skip(1)
            .filter(|l| !l.is_empty())
            .map(|l| l.rsplit('\t').next().unwrap())
            .collect();
        assert_eq!(tags, ["O", "B-Medication", "E-Medication", "O", "O"]);
        assert!(out.starts_with("#doc n1\nHeute\t_\tO\n"));
    }

    #[test]
    fn empty_document() {
        let d = doc("", "");
        assert_eq!(export_conll(&d, TagScheme::Bioes).unwrap(), "");
    }

    #[test]
    fn discontinuous_named() {
        let d = doc("Niere links und rechts", "T7\tBody_part 0 5;16 22\tNiere rechts\n");
        let err = export_conll(&d, TagScheme::Bioes).unwrap_err();
        assert!(err.to_string().contains("T7"));
    }

    #[test]
    fn reimport_recovers_spans() {
        let text = "Prograf 5 mg morgens. Im Sono kein Stau.";
        let ann = "T1\tMedication 0 7\tPrograf\nT2\tDosing 8 12\t5 mg\nT3\tDiagLab_Procedure 25 29\tSono\nT4\tMedical_condition 35 39\tStau\n";
        let d = doc(text, ann);
        let conll = read_conll(&export_conll(&d, TagScheme::Bioes).unwrap()).unwrap();
        assert_eq!(conll.len(), 1);
        assert_eq!(conll[0].doc_id.as_deref(), Some("n1"));
        let spans = import_conll_spans(&d, &conll[0]).unwrap();
        assert_eq!(spans, d.spans);
    }

    #[test]
    fn two_column_input() {
        let docs = read_conll("Im\tAPPRART\nSono\tNN\n\nStau\tNN\n").unwrap();
        assert_eq!(docs[0].sentences.len(), 2);
        assert_eq!(docs[0].sentences[0][1].tag, "O");
        assert!(read_conll("a\tb\tc\td\n").is_err());
    }
}
