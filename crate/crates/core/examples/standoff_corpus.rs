//! Reads standoff annotations, tokenizes, normalizes for training and
//! writes CoNLL. Without arguments the bundled test documents are used.
//!
//! cargo run --example standoff_corpus -- [file.ann ...]

use std::path::PathBuf;

use mex::corpus::{export_conll, export_standoff, normalize_document, parse_standoff, ConceptFrequencies};
use mex::scheme::TagScheme;
use mex::SchemaDefinition;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = SchemaDefinition::shipped();
    let mut paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if paths.is_empty() {
        let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/standoff");
        paths = ["05_discontinuous.ann", "19_multiline.ann", "21_overlap.ann"].iter().map(|f| data.join(f)).collect();
    }

    let mut docs = Vec::new();
    for ann_path in &paths {
        let ann = std::fs::read_to_string(ann_path)?;
        let txt = std::fs::read_to_string(ann_path.with_extension("txt"))?;
        let mut doc = parse_standoff(&ann, &txt, &schema)?;
        doc.doc_id = ann_path.file_stem().unwrap().to_string_lossy().into_owned();
        assert_eq!(export_standoff(&doc), (ann, txt), "round trip is byte-exact");
        doc.tokenize_with(&Default::default());
        println!(
            "{}: {} spans ({} discontinuous), {} relations, {} attributes, {} sentences",
            doc.doc_id,
            doc.spans.len(),
            doc.spans.iter().filter(|s| s.is_discontinuous()).count(),
            doc.relations.len(),
            doc.attributes.len(),
            doc.sentences.len()
        );
        docs.push(doc);
    }

    // Training data needs flat, non-overlapping spans.
    let freq = ConceptFrequencies::from_documents(&docs);
    for doc in &docs {
        let (flat, report) = normalize_document(doc, &Default::default(), &freq);
        println!("\n# {} {:?}", doc.doc_id, report);
        print!("{}", export_conll(&flat, TagScheme::Bioes)?);
    }
    Ok(())
}
