//! On-disk corpus layout: `<root>/<annotator>/<doc_type>/<doc_id>.{txt,ann}`,
//! with an optional `<doc_id>.pos` sidecar holding one line of
//! space-separated tags per sentence.

use std::fs;
use std::path::{Path, PathBuf};

use super::{export_standoff, AnnotatedDocument, DocType, StandoffParser, UnknownNames};
use crate::error::{Error, Result};
use crate::schema::SchemaDefinition;

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads every document version below `root`, ordered by annotator, type and id.
pub fn read_corpus_dir(
    root: impl AsRef<Path>,
    schema: &SchemaDefinition,
    unknown: UnknownNames,
) -> Result<Vec<AnnotatedDocument>> {
    let parser = StandoffParser::new(schema).unknown_names(unknown);
    let mut docs = Vec::new();
    for annotator_dir in sorted_entries(root.as_ref())? {
        if !annotator_dir.is_dir() {
            continue;
        }
        let annotator = annotator_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_owned();
        for type_dir in sorted_entries(&annotator_dir)? {
            if !type_dir.is_dir() {
                continue;
            }
            let type_name = type_dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let doc_type = DocType::parse(type_name).ok_or_else(|| {
                Error::Corpus(format!("{}: unknown document type directory", type_dir.display()))
            })?;
            for txt in sorted_entries(&type_dir)? {
                if txt.extension().and_then(|e| e.to_str()) != Some("txt") {
                    continue;
                }
                let text = read(&txt)?;
                let ann_path = txt.with_extension("ann");
                let ann = if ann_path.exists() { read(&ann_path)? } else { String::new() };
                let outcome = parser.parse(&ann, &text).map_err(|e| {
                    Error::Corpus(format!("{}: {e}", ann_path.display()))
                })?;
                for w in &outcome.warnings {
                    log::warn!("{}: {w}", ann_path.display());
                }
                let mut doc = outcome.document;
                doc.doc_id = txt
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_owned();
                doc.doc_type = doc_type;
                doc.annotator_id = annotator.clone();
                let pos_path = txt.with_extension("pos");
                if pos_path.exists() {
                    doc.pos = read(&pos_path)?
                        .lines()
                        .map(|l| l.split_whitespace().map(str::to_owned).collect())
                        .collect();
                }
                docs.push(doc);
            }
        }
    }
    Ok(docs)
}

pub fn write_document(root: impl AsRef<Path>, doc: &AnnotatedDocument) -> Result<()> {
    let dir = root
        .as_ref()
        .join(&doc.annotator_id)
        .join(doc.doc_type.as_str());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (ann, text) = export_standoff(doc);
    let base = dir.join(&doc.doc_id);
    let write = |ext: &str, content: &str| {
        let p = base.with_extension(ext);
        fs::write(&p, content).map_err(|e| Error::io(&p, e))
    };
    write("txt", &text)?;
    write("ann", &ann)?;
    if !doc.pos.is_empty() {
        let lines: Vec<String> = doc.pos.iter().map(|s| s.join(" ")).collect();
        write("pos", &(lines.join("\n") + "\n"))?;
    }
    Ok(())
}

pub fn write_corpus_dir<'a>(
    root: impl AsRef<Path>,
    docs: impl IntoIterator<Item = &'a AnnotatedDocument>,
) -> Result<()> {
    for d in docs {
        write_document(root.as_ref(), d)?;
    }
    Ok(())
}
