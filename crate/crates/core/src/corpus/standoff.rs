use std::collections::HashSet;

use log::warn;

use super::{
    AnnotatedDocument, AttributeAssignment, CharIndex, CharSpan, LineRef, RelationAnnotation,
    SpanAnnotation, StandoffLayout,
};
use crate::error::{Error, Result};
use crate::schema::{AttributeFamily, SchemaDefinition};

/// What to do with concept, relation, or attribute names the schema does not declare.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UnknownNames {
    #[default]
    Reject,
    Warn,
}

#[derive(Debug)]
pub struct ParseOutcome {
    pub document: AnnotatedDocument,
    pub warnings: Vec<String>,
}

pub struct StandoffParser<'a> {
    schema: &'a SchemaDefinition,
    unknown: UnknownNames,
}

/// Parses with the default (strict) settings.
pub fn parse_standoff(
    ann_content: &str,
    doc_content: &str,
    schema: &SchemaDefinition,
) -> Result<AnnotatedDocument> {
    StandoffParser::new(schema)
        .parse(ann_content, doc_content)
        .map(|o| o.document)
}

fn err(line: usize, reason: impl Into<String>) -> Error {
    Error::Standoff {
        line,
        reason: reason.into(),
    }
}

impl<'a> StandoffParser<'a> {
    pub fn new(schema: &'a SchemaDefinition) -> Self {
        StandoffParser {
            schema,
            unknown: UnknownNames::Reject,
        }
    }

    pub fn unknown_names(mut self, policy: UnknownNames) -> Self {
        self.unknown = policy;
        self
    }

    fn unknown_name(&self, line: usize, what: &str, name: &str, warnings: &mut Vec<String>) -> Result<()> {
        let msg = format!("unknown {what} {name}");
        match self.unknown {
            UnknownNames::Reject => Err(err(line, msg)),
            UnknownNames::Warn => {
                warnings.push(format!("line {line}: {msg}"));
                Ok(())
            }
        }
    }

    pub fn parse(&self, ann_content: &str, doc_content: &str) -> Result<ParseOutcome> {
        let index = CharIndex::new(doc_content);
        let doc_len = index.char_len();
        let mut doc = AnnotatedDocument::new("", doc_content);
        let mut warnings = Vec::new();
        let mut layout = StandoffLayout::default();
        let mut ids = HashSet::new();
        // Line numbers for the deferred reference checks.
        let mut rel_lines = Vec::new();
        let mut attr_lines = Vec::new();

        let mut lines: Vec<&str> = ann_content.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
            layout.final_newline = !lines.is_empty();
        }

        for (i, raw) in lines.iter().enumerate() {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            let kind = line.chars().next();
            match kind {
                Some('T') | Some('R') | Some('A') => {
                    let id = line.split('\t').next().unwrap_or_default();
                    if !ids.insert(id.to_owned()) {
                        return Err(err(line_no, format!("duplicate annotation id {id}")));
                    }
                }
                _ => {}
            }
            match kind {
                Some('T') => {
                    let span = self.parse_span(line, line_no, doc_content, &index, doc_len, &mut warnings)?;
                    layout.lines.push(LineRef::Span(span.id.clone()));
                    doc.spans.push(span);
                }
                Some('R') => {
                    let (rel, trailing_tab) = self.parse_relation(line, line_no, &mut warnings)?;
                    layout.lines.push(LineRef::Relation {
                        id: rel.id.clone(),
                        trailing_tab,
                    });
                    rel_lines.push(line_no);
                    doc.relations.push(rel);
                }
                Some('A') => {
                    let attr = self.parse_attribute(line, line_no, &mut warnings)?;
                    layout.lines.push(LineRef::Attribute(attr.id.clone()));
                    attr_lines.push(line_no);
                    doc.attributes.push(attr);
                }
                Some('#') => layout.lines.push(LineRef::Verbatim(raw.to_string())),
                _ => {
                    if !line.is_empty() {
                        warnings.push(format!("line {line_no}: unsupported record kept verbatim"));
                    }
                    layout.lines.push(LineRef::Verbatim(raw.to_string()));
                }
            }
        }

        let span_ids: HashSet<&str> = doc.spans.iter().map(|s| s.id.as_str()).collect();
        for (rel, &line_no) in doc.relations.iter().zip(&rel_lines) {
            for arg in [&rel.arg1, &rel.arg2] {
                if !span_ids.contains(arg.as_str()) {
                    return Err(err(line_no, format!("dangling relation argument {arg}")));
                }
            }
            if let Some(rt) = self.schema.relation(&rel.relation) {
                let t1 = &doc.span(&rel.arg1).unwrap().concept;
                let t2 = &doc.span(&rel.arg2).unwrap().concept;
                if !rt.accepts(t1, t2) {
                    let msg = format!(
                        "line {line_no}: {} does not admit ({t1}, {t2})",
                        rel.relation
                    );
                    warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
        for (attr, &line_no) in doc.attributes.iter().zip(&attr_lines) {
            if !span_ids.contains(attr.target.as_str()) {
                return Err(err(line_no, format!("dangling attribute target {}", attr.target)));
            }
        }

        doc.layout = layout;
        Ok(ParseOutcome {
            document: doc,
            warnings,
        })
    }

    fn parse_span(
        &self,
        line: &str,
        line_no: usize,
        text: &str,
        index: &CharIndex,
        doc_len: usize,
        warnings: &mut Vec<String>,
    ) -> Result<SpanAnnotation> {
        let mut cols = line.splitn(3, '\t');
        let id = cols.next().unwrap_or_default();
        let (Some(head), Some(surface)) = (cols.next(), cols.next()) else {
            return Err(err(line_no, "span record needs three tab-separated fields"));
        };
        let (concept, offsets) = head
            .split_once(' ')
            .ok_or_else(|| err(line_no, "span record lacks offsets"))?;
        if concept.is_empty() {
            return Err(err(line_no, "empty concept type"));
        }
        if self.schema.concept_index(concept).is_none() {
            self.unknown_name(line_no, "concept type", concept, warnings)?;
        }

        let mut fragments = Vec::new();
        for frag in offsets.split(';') {
            let mut parts = frag.split(' ');
            let (Some(s), Some(e), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(line_no, format!("malformed fragment {frag:?}")));
            };
            let start: usize = s
                .parse()
                .map_err(|_| err(line_no, format!("bad start offset {s:?}")))?;
            let end: usize = e
                .parse()
                .map_err(|_| err(line_no, format!("bad end offset {e:?}")))?;
            if start >= end {
                return Err(err(line_no, format!("empty or inverted fragment {start}..{end}")));
            }
            if end > doc_len {
                return Err(err(
                    line_no,
                    format!("offset {end} out of range (document has {doc_len} characters)"),
                ));
            }
            if let Some(prev) = fragments.last().map(|f: &CharSpan| f.end) {
                if start < prev {
                    return Err(err(line_no, "fragments unsorted or overlapping"));
                }
            }
            fragments.push(CharSpan::new(start, end));
        }

        let expected = fragments
            .iter()
            .map(|f| index.slice(text, *f))
            .collect::<Vec<_>>()
            .join(" ");
        if expected != surface {
            return Err(err(
                line_no,
                format!("surface {surface:?} does not match text {expected:?}"),
            ));
        }

        Ok(SpanAnnotation {
            id: id.to_owned(),
            concept: concept.to_owned(),
            fragments,
            surface: surface.to_owned(),
        })
    }

    fn parse_relation(
        &self,
        line: &str,
        line_no: usize,
        warnings: &mut Vec<String>,
    ) -> Result<(RelationAnnotation, bool)> {
        let cols: Vec<&str> = line.split('\t').collect();
        let trailing_tab = match cols.len() {
            2 => false,
            3 if cols[2].is_empty() => true,
            _ => return Err(err(line_no, "relation record needs two tab-separated fields")),
        };
        let fields: Vec<&str> = cols[1].split(' ').collect();
        let [relation, a1, a2] = fields[..] else {
            return Err(err(line_no, "relation record must be `<Type> Arg1:<id> Arg2:<id>`"));
        };
        let arg1 = a1
            .strip_prefix("Arg1:")
            .ok_or_else(|| err(line_no, "missing Arg1"))?;
        let arg2 = a2
            .strip_prefix("Arg2:")
            .ok_or_else(|| err(line_no, "missing Arg2"))?;
        if self.schema.relation(relation).is_none() {
            self.unknown_name(line_no, "relation type", relation, warnings)?;
        }
        Ok((
            RelationAnnotation {
                id: cols[0].to_owned(),
                relation: relation.to_owned(),
                arg1: arg1.to_owned(),
                arg2: arg2.to_owned(),
            },
            trailing_tab,
        ))
    }

    fn parse_attribute(
        &self,
        line: &str,
        line_no: usize,
        warnings: &mut Vec<String>,
    ) -> Result<AttributeAssignment> {
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| err(line_no, "attribute record needs two tab-separated fields"))?;
        let fields: Vec<&str> = rest.split(' ').collect();
        let [family, target, value] = fields[..] else {
            return Err(err(line_no, "attribute record must be `<Family> <target> <Value>`"));
        };
        let Some(family) = AttributeFamily::parse(family) else {
            // Unknown families cannot be represented; they are always fatal.
            return Err(err(line_no, format!("unknown attribute family {family}")));
        };
        if !self.schema.attribute_values(family).iter().any(|v| v == value) {
            self.unknown_name(line_no, &format!("{family} value"), value, warnings)?;
        }
        Ok(AttributeAssignment {
            id: id.to_owned(),
            family,
            target: target.to_owned(),
            value: value.to_owned(),
        })
    }
}

fn span_line(s: &SpanAnnotation) -> String {
    let frags = s
        .fragments
        .iter()
        .map(|f| format!("{} {}", f.start, f.end))
        .collect::<Vec<_>>()
        .join(";");
    format!("{}\t{} {}\t{}", s.id, s.concept, frags, s.surface)
}

fn relation_line(r: &RelationAnnotation, trailing_tab: bool) -> String {
    let tab = if trailing_tab { "\t" } else { "" };
    format!("{}\t{} Arg1:{} Arg2:{}{tab}", r.id, r.relation, r.arg1, r.arg2)
}

fn attribute_line(a: &AttributeAssignment) -> String {
    format!("{}\t{} {} {}", a.id, a.family, a.target, a.value)
}

/// Serializes a document back to `(ann, txt)`. Lines keep their parsed order;
/// annotations added after parsing are appended spans first, then relations,
/// then attributes.
pub fn export_standoff(doc: &AnnotatedDocument) -> (String, String) {
    let mut out: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for line in &doc.layout.lines {
        match line {
            LineRef::Span(id) => {
                if let Some(s) = doc.spans.iter().find(|s| &s.id == id) {
                    out.push(span_line(s));
                    seen.insert(id.as_str());
                }
            }
            LineRef::Relation { id, trailing_tab } => {
                if let Some(r) = doc.relations.iter().find(|r| &r.id == id) {
                    out.push(relation_line(r, *trailing_tab));
                    seen.insert(id.as_str());
                }
            }
            LineRef::Attribute(id) => {
                if let Some(a) = doc.attributes.iter().find(|a| &a.id == id) {
                    out.push(attribute_line(a));
                    seen.insert(id.as_str());
                }
            }
            LineRef::Verbatim(raw) => out.push(raw.clone()),
        }
    }
    let laid_out = !doc.layout.lines.is_empty();
    for s in doc.spans.iter().filter(|s| !seen.contains(s.id.as_str())) {
        out.push(span_line(s));
    }
    for r in doc.relations.iter().filter(|r| !seen.contains(r.id.as_str())) {
        out.push(relation_line(r, false));
    }
    for a in doc.attributes.iter().filter(|a| !seen.contains(a.id.as_str())) {
        out.push(attribute_line(a));
    }
    let mut ann = out.join("\n");
    let newline = if laid_out { doc.layout.final_newline } else { !out.is_empty() };
    if newline {
        ann.push('\n');
    }
    (ann, doc.text.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> SchemaDefinition {
        SchemaDefinition::shipped()
    }

    #[test]
    fn single_medication_span() {
        let doc = parse_standoff("T1\tMedication 0 7\tPrograf\n", "Prograf 5 mg", &schema()).unwrap();
        assert_eq!(doc.spans.len(), 1);
        let s = &doc.spans[0];
        assert_eq!(s.concept, "Medication");
        assert_eq!(s.fragments, vec![CharSpan::new(0, 7)]);
        assert_eq!(s.surface, "Prograf");
        assert!(doc.sentences.is_empty() && doc.tokens.is_empty());
    }

    #[test]
    fn empty_annotations() {
        let doc = parse_standoff("", "Im Sono kein Stau.", &schema()).unwrap();
        assert!(doc.spans.is_empty() && doc.relations.is_empty() && doc.attributes.is_empty());
        assert_eq!(export_standoff(&doc).0, "");
    }

    #[test]
    fn code_point_offsets() {
        // "Ödem" is four code points and five bytes.
        let doc = parse_standoff("T1\tMedical_condition 4 8\tÖdem", "Kein Ödem", &schema());
        assert!(doc.is_err());
        let doc = parse_standoff("T1\tMedical_condition 5 9\tÖdem", "Kein Ödem", &schema()).unwrap();
        assert_eq!(doc.spans[0].fragments[0], CharSpan::new(5, 9));
    }

    #[test]
    fn discontinuous_surface_joined_by_space() {
        let text = "Niere links und rechts";
        let ann = "T1\tBody_part 0 5;16 22\tNiere rechts\n";
        let doc = parse_standoff(ann, text, &schema()).unwrap();
        assert!(doc.spans[0].is_discontinuous());
        assert_eq!(doc.spans[0].envelope(), CharSpan::new(0, 22));
        assert_eq!(export_standoff(&doc).0, ann);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let s = schema();
        let text = "Prograf 5 mg";
        let cases = [
            ("T1\tMedication 0 7\n", 1, "three tab-separated"),
            ("#c\nT1\tMedication 0 70\tPrograf", 2, "out of range"),
            ("T1\tMedication 0 7\tPrograd", 1, "does not match"),
            ("T1\tMedication 0 7\tPrograf\nR1\tHas_dosing Arg1:T1 Arg2:T9", 2, "dangling"),
            ("T1\tDrug 0 7\tPrograf", 1, "unknown concept type Drug"),
            ("T1\tMedication 0 7\tPrograf\nR1\tTreats Arg1:T1 Arg2:T1", 2, "unknown relation type"),
            ("T1\tMedication 0 7\tPrograf\nA1\tDocTime T1 Someday", 2, "DocTime value"),
            ("T1\tMedication 7 0\tPrograf", 1, "inverted"),
            ("T1\tMedication 0 7\tPrograf\nT1\tDosing 8 12\t5 mg", 2, "duplicate"),
        ];
        for (ann, line, needle) in cases {
            match parse_standoff(ann, text, &s) {
                Err(Error::Standoff { line: l, reason }) => {
                    assert_eq!(l, line, "{ann:?}");
                    assert!(reason.contains(needle), "{reason} lacks {needle}");
                }
                other => panic!("{ann:?}: expected error, got {other:?}"),
            }
        }
    }

    #[test]
    fn warn_mode_keeps_unknown_names() {
        let s = schema();
        let out = StandoffParser::new(&s)
            .unknown_names(UnknownNames::Warn)
            .parse("T1\tDrug 0 7\tPrograf\n", "Prograf 5 mg")
            .unwrap();
        assert_eq!(out.document.spans[0].concept, "Drug");
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn signature_violation_is_a_warning() {
        let s = schema();
        let text = "Prograf 5 mg";
        let ann = "T1\tMedication 0 7\tPrograf\nT2\tDosing 8 12\t5 mg\nR1\tHas_dosing Arg1:T2 Arg2:T1\n";
        let out = StandoffParser::new(&s).parse(ann, text).unwrap();
        assert_eq!(out.document.relations.len(), 1);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn verbatim_lines_survive() {
        let s = schema();
        let text = "Prograf 5 mg";
        let ann = "T1\tMedication 0 7\tPrograf\n#1\tAnnotatorNotes T1\tTacrolimus\nR1\tHas_dosing Arg1:T1 Arg2:T2\t\nT2\tDosing 8 12\t5 mg\n*\tAlias T1 T2";
        let doc = parse_standoff(ann, text, &s).unwrap();
        assert_eq!(export_standoff(&doc).0, ann);
    }
}
