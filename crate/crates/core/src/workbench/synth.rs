//! Template-driven synthetic clinical documents with gold concepts,
//! relations, attributes and part-of-speech tags.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    write_corpus_dir, AnnotatedDocument, AttributeAssignment, CharIndex, CharSpan, DocType, RelationAnnotation,
    SpanAnnotation, Tokenizer,
};
use crate::error::{Error, Result};
use crate::schema::{AttributeFamily, SchemaDefinition};

/// A sentence pattern. `{Concept}` draws from the vocabulary list named
/// after the concept, `{Concept:list}` from another list. Relations and
/// attributes refer to slots by their position in the pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub pattern: String,
    #[serde(default)]
    pub relations: Vec<(String, usize, usize)>,
    #[serde(default)]
    pub attributes: Vec<(String, String, usize)>,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub documents: usize,
    /// Share of discharge summaries; the rest are clinical notes.
    pub summary_fraction: f64,
    pub note_tokens: usize,
    pub summary_tokens: usize,
    /// Per-word probability of an abbreviation or a letter swap.
    pub noise_rate: f64,
    /// Per-span probability that the second annotator deviates.
    pub perturbation_rate: f64,
    pub second_annotator: bool,
    pub templates: Vec<Template>,
    pub vocabulary: BTreeMap<String, Vec<String>>,
}

fn t(pattern: &str, relations: &[(&str, usize, usize)]) -> Template {
    Template {
        pattern: pattern.into(),
        relations: relations.iter().map(|(r, a, b)| ((*r).into(), *a, *b)).collect(),
        attributes: Vec::new(),
        weight: 1.0,
    }
}

fn shipped_templates() -> Vec<Template> {
    let mut v = vec![
        t("{Medication} {Dosing} {Time_information}.", &[("Has_dosing", 0, 1), ("Has_time_info", 0, 2)]),
        t("{DiagLab_Procedure} zeigt {Medical_condition} {Local_specification}.", &[("Shows", 0, 1), ("Is_located", 1, 2)]),
        t("{Biological_chemistry} {Measurement}.", &[("Has_measure", 0, 1)]),
        t("Aufnahme wegen {Medical_specification} {Medical_condition}.", &[("Is_specified", 1, 0)]),
        t("{Treatment} über {Medical_device} seit {Time_information}.", &[("Involves", 0, 1), ("Has_time_info", 0, 2)]),
        t("{Person} berichtet über {Medical_condition} im {Body_part}.", &[("Is_located", 1, 2)]),
        t("{Body_Fluid} mit {Medical_condition}.", &[("Has_state", 0, 1)]),
        t("{Biological_parameter} {Measurement}, {State_of_health}.", &[("Has_measure", 0, 1), ("Has_state", 0, 2)]),
        t("{Process} {State_of_health}.", &[("Has_state", 0, 1)]),
        t("{Treatment} mit {Medication} {Dosing}.", &[("Involves", 0, 1), ("Has_dosing", 1, 2)]),
        t("{DiagLab_Procedure} des {Body_part} ohne Befund.", &[("Examines", 0, 1)]),
        t("Kein Hinweis auf {Medical_condition}.", &[]),
        t("{Medication} wurde {Time_information} abgesetzt.", &[("Has_time_info", 0, 1)]),
        t("{Person} wünscht {Treatment}.", &[]),
        t("Im {DiagLab_Procedure} {Biological_chemistry} {Measurement}.", &[("Shows", 0, 1), ("Has_measure", 1, 2)]),
        t("{Medical_condition} {Local_specification} im {Body_part}.", &[("Is_located", 0, 1), ("Is_located", 0, 2)]),
        t("Weiterhin {Treatment} {Time_information}.", &[("Has_time_info", 0, 1)]),
        t("{Biological_parameter} {State_of_health}.", &[("Has_state", 0, 1)]),
        t("Zustand nach {Treatment} {Time_information}.", &[("Has_time_info", 0, 1)]),
        // Identical surface, told apart only by the concept types.
        t("Aktuell {Medication:level_subject} {Dosing:level_value}.", &[("Has_dosing", 0, 1)]),
        t("Aktuell {Biological_chemistry:level_subject} {Measurement:level_value}.", &[("Has_measure", 0, 1)]),
    ];
    v[11].attributes.push(("LevelOfTruth".into(), "Negative".into(), 0));
    v[12].attributes.push(("DocTime".into(), "Past".into(), 0));
    v[18].attributes.push(("DocTime".into(), "Past".into(), 0));
    for ambiguous in &mut v[19..] {
        ambiguous.weight = 0.5;
    }
    v
}

fn shipped_vocabulary() -> BTreeMap<String, Vec<String>> {
    let lists: &[(&str, &[&str])] = &[
        ("Medical_condition", &["Niereninsuffizienz", "Hypertonie", "Diabetes mellitus", "Harnwegsinfekt", "Anämie", "Abstoßungsreaktion", "Proteinurie", "Ödeme", "Hyperkaliämie", "Pneumonie"]),
        ("DiagLab_Procedure", &["Sonographie", "Nierenbiopsie", "Urinstatus", "Labor", "EKG", "Röntgen-Thorax", "Duplexsonographie"]),
        ("Treatment", &["Dialyse", "Hämodialyse", "Nierentransplantation", "Plasmapherese", "Peritonealdialyse", "Immunadsorption"]),
        ("Medication", &["Prograf", "Cellcept", "Ramipril", "Furosemid", "Prednisolon", "Amlodipin", "Valganciclovir", "Cotrim"]),
        ("Biological_chemistry", &["Kreatinin", "Kalium", "Harnstoff", "Natrium", "Albumin", "CRP", "Hämoglobin"]),
        ("Process", &["Diurese", "Miktion", "Stuhlgang", "Appetit", "Wundheilung"]),
        ("Person", &["Patient", "Patientin", "Ehefrau", "Hausarzt", "Tochter"]),
        ("Body_part", &["Bein", "Rücken", "Unterbauch", "Transplantat", "Oberschenkel", "Thorax"]),
        ("Body_Fluid", &["Urin", "Blut", "Serum", "Punktat", "Dialysat"]),
        ("Medical_device", &["Shaldon-Katheter", "Dialysekatheter", "Shunt", "Port", "Tenckhoff-Katheter"]),
        ("Biological_parameter", &["Blutdruck", "Puls", "GFR", "Gewicht", "Temperatur"]),
        ("Medical_specification", &["chronischer", "akuter", "terminaler", "rezidivierender", "schwerer"]),
        ("Local_specification", &["links", "rechts", "beidseits", "distal", "proximal"]),
        ("Time_information", &["morgens", "abends", "täglich", "seit 2015", "vor drei Monaten", "im Juni"]),
        ("Dosing", &["5 mg", "1-0-1", "2 x 500 mg", "10 mg", "40 mg", "0-0-1"]),
        ("Measurement", &["1,8 mg/dl", "4,2 mmol/l", "135 mmol/l", "12,1 g/dl", "140/90 mmHg", "72 kg"]),
        ("State_of_health", &["stabil", "unauffällig", "regelrecht", "gebessert", "reduziert"]),
        ("level_subject", &["Tacrolimus", "Ciclosporin", "Everolimus", "Sirolimus"]),
        ("level_value", &["3 mg", "8 mg", "6 mg", "4 mg"]),
    ];
    lists
        .iter()
        .map(|(k, v)| ((*k).to_owned(), v.iter().map(|s| (*s).to_owned()).collect()))
        .collect()
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 1,
            documents: 100,
            summary_fraction: 0.045,
            note_tokens: 54,
            summary_tokens: 938,
            noise_rate: 0.0,
            perturbation_rate: 0.1,
            second_annotator: true,
            templates: shipped_templates(),
            vocabulary: shipped_vocabulary(),
        }
    }
}

enum Piece {
    Text(String),
    Slot { concept: String, list: String },
}

fn parse_pattern(pattern: &str) -> Result<Vec<Piece>> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Text(rest[..open].to_owned()));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::Config(format!("unclosed slot in template {pattern:?}")))?
            + open;
        let inner = &rest[open + 1..close];
        let (concept, list) = inner.split_once(':').unwrap_or((inner, inner));
        out.push(Piece::Slot {
            concept: concept.to_owned(),
            list: list.to_owned(),
        });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest.to_owned()));
    }
    Ok(out)
}

struct Compiled {
    pieces: Vec<Piece>,
    template: Template,
}

impl SyntheticSpec {
    fn compile(&self, schema: &SchemaDefinition) -> Result<Vec<Compiled>> {
        if self.templates.is_empty() {
            return Err(Error::Config("no templates".into()));
        }
        if !(0.0..=1.0).contains(&self.summary_fraction)
            || !(0.0..=1.0).contains(&self.noise_rate)
            || !(0.0..=1.0).contains(&self.perturbation_rate)
        {
            return Err(Error::Config("rates must lie in [0, 1]".into()));
        }
        self.templates
            .iter()
            .map(|t| {
                let pieces = parse_pattern(&t.pattern)?;
                let slots: Vec<&str> = pieces
                    .iter()
                    .filter_map(|p| match p {
                        Piece::Slot { concept, list } => Some((concept, list)),
                        Piece::Text(_) => None,
                    })
                    .map(|(c, l)| {
                        if schema.concept_index(c).is_none() {
                            return Err(Error::Schema(format!("template {:?} uses undeclared concept type {c}", t.pattern)));
                        }
                        if self.vocabulary.get(l).is_none_or(|v| v.is_empty()) {
                            return Err(Error::Config(format!("template {:?} uses empty vocabulary list {l}", t.pattern)));
                        }
                        Ok(c.as_str())
                    })
                    .collect::<Result<_>>()?;
                for (r, a, b) in &t.relations {
                    if schema.relation(r).is_none() {
                        return Err(Error::Schema(format!("template {:?} uses undeclared relation {r}", t.pattern)));
                    }
                    if *a >= slots.len() || *b >= slots.len() || a == b {
                        return Err(Error::Config(format!("template {:?}: bad relation slots", t.pattern)));
                    }
                }
                for (family, value, slot) in &t.attributes {
                    let f = AttributeFamily::parse(family)
                        .ok_or_else(|| Error::Schema(format!("unknown attribute family {family}")))?;
                    if !schema.attribute_values(f).contains(value) || *slot >= slots.len() {
                        return Err(Error::Schema(format!("bad attribute {family}={value} in {:?}", t.pattern)));
                    }
                }
                Ok(Compiled {
                    pieces,
                    template: t.clone(),
                })
            })
            .collect()
    }
}

const CLOSED_CLASS: &[(&str, &str)] = &[
    ("der", "ART"), ("die", "ART"), ("das", "ART"), ("des", "ART"), ("dem", "ART"), ("den", "ART"),
    ("mit", "APPR"), ("über", "APPR"), ("seit", "APPR"), ("vor", "APPR"), ("auf", "APPR"), ("wegen", "APPR"),
    ("ohne", "APPR"), ("nach", "APPR"), ("im", "APPRART"), ("am", "APPRART"), ("kein", "PIAT"),
    ("zeigt", "VVFIN"), ("berichtet", "VVFIN"), ("wünscht", "VVFIN"), ("wurde", "VAFIN"), ("abgesetzt", "VVPP"),
    ("morgens", "ADV"), ("abends", "ADV"), ("täglich", "ADJD"), ("aktuell", "ADV"), ("weiterhin", "ADV"),
    ("links", "ADV"), ("rechts", "ADV"), ("beidseits", "ADV"), ("drei", "CARD"), ("x", "XY"), ("mellitus", "NN"),
    ("mg", "NN"), ("dl", "NN"), ("mmol", "NN"), ("l", "NN"), ("g", "NN"), ("mmhg", "NN"), ("kg", "NN"),
];

const PROPER_NAMES: &[&str] = &[
    "Prograf", "Cellcept", "Ramipril", "Furosemid", "Prednisolon", "Amlodipin", "Valganciclovir", "Cotrim",
    "Tacrolimus", "Ciclosporin", "Everolimus", "Sirolimus", "Shaldon", "Tenckhoff", "Juni",
];

/// STTS tag of a generated token.
pub fn synthetic_pos(token: &str) -> &'static str {
    let lower = token.to_lowercase();
    if let Some((_, tag)) = CLOSED_CLASS.iter().find(|(w, _)| *w == lower) {
        return tag;
    }
    let first = token.chars().next().unwrap_or(' ');
    match first {
        ',' => "$,",
        '.' | '!' | '?' | ':' | ';' => "$.",
        _ if !first.is_alphanumeric() => "$(",
        _ if token.chars().all(|c| c.is_ascii_digit()) => "CARD",
        _ if PROPER_NAMES.contains(&token) => "NE",
        _ if first.is_uppercase() => "NN",
        _ => "ADJA",
    }
}

struct SpanDraft {
    concept: String,
    chars: CharSpan,
}

struct SentenceDraft {
    text: String,
    spans: Vec<SpanDraft>,
    relations: Vec<(String, usize, usize)>,
    attributes: Vec<(String, String, usize)>,
}

fn word_noise(word: &str, rate: f64, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    if rate <= 0.0 || chars.len() < 5 || !chars.iter().all(|c| c.is_alphabetic()) || !rng.random_bool(rate) {
        return word.to_owned();
    }
    if chars.len() >= 9 && rng.random_bool(0.5) {
        return chars[..4].iter().collect();
    }
    let mut chars = chars;
    let i = rng.random_range(1..chars.len() - 2);
    chars.swap(i, i + 1);
    chars.into_iter().collect()
}

fn noisy(text: &str, rate: f64, rng: &mut ChaCha8Rng) -> String {
    text.split(' ').map(|w| word_noise(w, rate, rng)).collect::<Vec<_>>().join(" ")
}

fn render(c: &Compiled, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> SentenceDraft {
    let mut text = String::new();
    let mut len = 0;
    let mut spans = Vec::new();
    for p in &c.pieces {
        let (s, concept) = match p {
            Piece::Text(s) => (noisy(s, spec.noise_rate, rng), None),
            Piece::Slot { concept, list } => {
                let surface = spec.vocabulary[list].choose(rng).expect("non-empty list");
                (noisy(surface, spec.noise_rate, rng), Some(concept))
            }
        };
        let n = s.chars().count();
        if let Some(concept) = concept {
            spans.push(SpanDraft {
                concept: concept.clone(),
                chars: CharSpan::new(len, len + n),
            });
        }
        text.push_str(&s);
        len += n;
    }
    SentenceDraft {
        text,
        spans,
        relations: c.template.relations.clone(),
        attributes: c.template.attributes.clone(),
    }
}

/// Gold documents for annotator `a1`, plus perturbed copies for `a2`
/// when requested.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SyntheticCorpus {
    pub primary: Vec<AnnotatedDocument>,
    pub second: Vec<AnnotatedDocument>,
}

impl SyntheticCorpus {
    pub fn all(&self) -> impl Iterator<Item = &AnnotatedDocument> {
        self.primary.iter().chain(&self.second)
    }
}

pub fn generate(spec: &SyntheticSpec, schema: &SchemaDefinition) -> Result<SyntheticCorpus> {
    let compiled = spec.compile(schema)?;
    let weights: Vec<f64> = compiled.iter().map(|c| c.template.weight.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Config("template weights sum to zero".into()));
    }
    let tokenizer = Tokenizer::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let summaries = (spec.documents as f64 * spec.summary_fraction).round() as usize;
    let mut corpus = SyntheticCorpus::default();
    for d in 0..spec.documents {
        // Summaries are spread evenly through the id sequence.
        let is_summary = summaries > 0 && (d * summaries) / spec.documents != ((d + 1) * summaries) / spec.documents;
        let (doc_type, mean) = if is_summary {
            (DocType::DischargeSummary, spec.summary_tokens)
        } else {
            (DocType::ClinicalNote, spec.note_tokens)
        };
        let target = rng.random_range(mean / 4..=mean + mean * 3 / 4).max(1);
        let mut sentences = Vec::new();
        let mut tokens = 0;
        while tokens < target {
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = compiled.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    chosen = i;
                    break;
                }
                pick -= w;
            }
            let s = render(&compiled[chosen], spec, &mut rng);
            let n = tokenizer.tokenize(&s.text).tokens.iter().map(Vec::len).sum::<usize>();
            if tokens > 0 && tokens + n / 2 > target {
                break;
            }
            tokens += n;
            sentences.push(s);
        }
        let prefix = if is_summary { "summary" } else { "note" };
        let doc = assemble(format!("{prefix}_{d:04}"), doc_type, &sentences, &tokenizer, schema)?;
        if spec.second_annotator {
            let mut second = perturb(&doc, spec.perturbation_rate, schema, &mut rng);
            second.annotator_id = "a2".into();
            corpus.second.push(second);
        }
        corpus.primary.push(doc);
    }
    Ok(corpus)
}

fn assemble(
    doc_id: String,
    doc_type: DocType,
    sentences: &[SentenceDraft],
    tokenizer: &Tokenizer,
    schema: &SchemaDefinition,
) -> Result<AnnotatedDocument> {
    let mut doc = AnnotatedDocument::new(doc_id, "");
    doc.doc_type = doc_type;
    doc.annotator_id = "a1".into();
    let mut text = String::new();
    let mut offset = 0;
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            // Summaries break into paragraphs every few sentences.
            let sep = if doc_type == DocType::DischargeSummary && i % 6 == 0 { "\n" } else { " " };
            text.push_str(sep);
            offset += 1;
        }
        let first = doc.spans.len();
        for sp in &s.spans {
            doc.spans.push(SpanAnnotation {
                id: format!("T{}", doc.spans.len() + 1),
                concept: sp.concept.clone(),
                fragments: vec![CharSpan::new(sp.chars.start + offset, sp.chars.end + offset)],
                surface: String::new(),
            });
        }
        for (r, a, b) in &s.relations {
            doc.relations.push(RelationAnnotation {
                id: format!("R{}", doc.relations.len() + 1),
                relation: r.clone(),
                arg1: doc.spans[first + a].id.clone(),
                arg2: doc.spans[first + b].id.clone(),
            });
        }
        for (family, value, slot) in &s.attributes {
            doc.attributes.push(AttributeAssignment {
                id: format!("A{}", doc.attributes.len() + 1),
                family: AttributeFamily::parse(family).expect("validated family"),
                target: doc.spans[first + slot].id.clone(),
                value: value.clone(),
            });
        }
        text.push_str(&s.text);
        offset += s.text.chars().count();
    }
    let index = CharIndex::new(&text);
    for sp in &mut doc.spans {
        sp.surface = index.slice(&text, sp.fragments[0]).to_owned();
    }
    doc.text = text;
    doc.tokenize_with(tokenizer);
    if doc.sentences.len() != sentences.len() {
        return Err(Error::Corpus(format!(
            "{}: generated {} sentences but the tokenizer found {}",
            doc.doc_id,
            sentences.len(),
            doc.sentences.len()
        )));
    }
    for sp in &doc.spans {
        let f = sp.fragments[0];
        let aligned = doc.tokens.iter().flatten().any(|t| t.start == f.start)
            && doc.tokens.iter().flatten().any(|t| t.end == f.end);
        if !aligned {
            return Err(Error::Corpus(format!("{}: span {} is not token aligned", doc.doc_id, sp.id)));
        }
    }
    doc.pos = doc
        .token_strings()
        .iter()
        .map(|s| s.iter().map(|t| synthetic_pos(t).to_owned()).collect())
        .collect();
    debug_assert!(schema.concept_names().count() > 0);
    Ok(doc)
}

/// Copy of `doc` where each span is, with probability `rate`, dropped,
/// relabelled or shortened by one token.
pub fn perturb(doc: &AnnotatedDocument, rate: f64, schema: &SchemaDefinition, rng: &mut ChaCha8Rng) -> AnnotatedDocument {
    let mut out = doc.clone();
    if rate <= 0.0 {
        return out;
    }
    let concepts: Vec<&str> = schema.concept_names().collect();
    let index = CharIndex::new(&doc.text);
    let mut dropped = Vec::new();
    out.spans.retain_mut(|sp| {
        if !rng.random_bool(rate) {
            return true;
        }
        match rng.random_range(0..3) {
            0 => {
                dropped.push(sp.id.clone());
                false
            }
            1 => {
                let others: Vec<&&str> = concepts.iter().filter(|c| **c != sp.concept).collect();
                sp.concept = (**others.choose(rng).expect("several concept types")).to_owned();
                true
            }
            _ => {
                let f = sp.fragments[0];
                let inner: Vec<&CharSpan> = doc.tokens.iter().flatten().filter(|t| f.contains(t)).collect();
                if inner.len() > 1 {
                    let f2 = CharSpan::new(f.start, inner[inner.len() - 2].end);
                    sp.fragments = vec![f2];
                    sp.surface = index.slice(&doc.text, f2).to_owned();
                }
                true
            }
        }
    });
    out.relations.retain(|r| !dropped.contains(&r.arg1) && !dropped.contains(&r.arg2));
    out.attributes.retain(|a| !dropped.contains(&a.target));
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub documents: usize,
    pub notes: usize,
    pub summaries: usize,
    pub mean_note_tokens: f64,
    pub mean_summary_tokens: f64,
}

pub fn corpus_report(docs: &[AnnotatedDocument]) -> SynthReport {
    let mean = |ty: DocType| {
        let v: Vec<usize> = docs.iter().filter(|d| d.doc_type == ty).map(|d| d.token_count()).collect();
        if v.is_empty() {
            (0, 0.0)
        } else {
            (v.len(), v.iter().sum::<usize>() as f64 / v.len() as f64)
        }
    };
    let (notes, mean_note_tokens) = mean(DocType::ClinicalNote);
    let (summaries, mean_summary_tokens) = mean(DocType::DischargeSummary);
    SynthReport {
        documents: docs.len(),
        notes,
        summaries,
        mean_note_tokens,
        mean_summary_tokens,
    }
}

/// Generates a corpus and writes it below `root` in the standoff layout.
pub fn synth_corpus(spec: &SyntheticSpec, schema: &SchemaDefinition, root: impl AsRef<Path>) -> Result<SynthReport> {
    let corpus = generate(spec, schema)?;
    write_corpus_dir(root, corpus.all())?;
    Ok(corpus_report(&corpus.primary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_cover_the_schema() {
        let schema = SchemaDefinition::shipped();
        let spec = SyntheticSpec::default();
        let mut concepts = std::collections::BTreeSet::new();
        let mut relations = std::collections::BTreeSet::new();
        for c in spec.compile(&schema).unwrap() {
            for p in &c.pieces {
                if let Piece::Slot { concept, .. } = p {
                    concepts.insert(concept.clone());
                }
            }
            relations.extend(c.template.relations.iter().map(|r| r.0.clone()));
        }
        assert_eq!(concepts.len(), 17);
        assert_eq!(relations.len(), 9);
    }

    #[test]
    fn undeclared_concept_is_rejected() {
        let mut spec = SyntheticSpec::default();
        spec.templates.push(t("{Gene} here.", &[]));
        spec.vocabulary.insert("Gene".into(), vec!["BRCA1".into()]);
        assert!(matches!(generate(&spec, &SchemaDefinition::shipped()), Err(Error::Schema(_))));
    }

    #[test]
    fn deterministic_and_shaped() {
        let schema = SchemaDefinition::shipped();
        let spec = SyntheticSpec {
            documents: 60,
            summary_fraction: 0.05,
            noise_rate: 0.05,
            ..SyntheticSpec::default()
        };
        let a = generate(&spec, &schema).unwrap();
        assert_eq!(a, generate(&spec, &schema).unwrap());
        let r = corpus_report(&a.primary);
        assert_eq!(r.summaries, 3);
        assert!((r.mean_note_tokens - 54.0).abs() <= 0.2 * 54.0, "{r:?}");
        for d in &a.primary {
            assert_eq!(d.pos.len(), d.tokens.len());
            assert!(d.pos.iter().zip(&d.tokens).all(|(p, t)| p.len() == t.len()));
        }
    }
}
