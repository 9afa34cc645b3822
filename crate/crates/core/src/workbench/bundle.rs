//! Model bundles: a directory with `manifest.json` and one checksummed
//! component file per trained model.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::{decode_component, encode_component, sha256_hex, Reader, Writer, MEXW_VERSION};
use crate::corpus::Tokenizer;
use crate::embeddings::{CharLmNet, ContextualLm, Direction, EmbeddingProvider, EmbeddingStack, ProviderKind, SubwordModel, VocabEntry};
use crate::error::{Error, Result};
use crate::nn::{Linear, Lstm};
use crate::relation::{CandidatePolicy, RelationConfig, RelationModel};
use crate::schema::SchemaDefinition;
use crate::scheme::TagScheme;
use crate::tagger::{LabelVocab, TaggerModel, TaggerNet, TaggerTask};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Component names, in manifest order.
pub const COMPONENTS: [&str; 6] = ["words", "charlm_forward", "charlm_backward", "pos", "concepts", "relations"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub name: String,
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub abbreviations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub created_by: String,
    pub created_unix: u64,
    pub schema_fingerprint: String,
    pub tokenizer: TokenizerConfig,
    pub components: Vec<ComponentEntry>,
}

/// Relation classifier plus the settings used to pair predicted concepts.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationStage {
    pub model: RelationModel,
    pub policy: CandidatePolicy,
    pub threshold: f64,
}

#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub created_unix: u64,
    pub schema_fingerprint: String,
    pub tokenizer: Tokenizer,
    pub words: Option<Arc<SubwordModel>>,
    pub forward_lm: Option<Arc<ContextualLm>>,
    pub backward_lm: Option<Arc<ContextualLm>>,
    pub pos: Option<TaggerModel>,
    pub concepts: Option<TaggerModel>,
    pub relations: Option<RelationStage>,
}

/// What `GET /health` reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub status: String,
    pub version: u32,
    pub created_by: String,
    pub created_unix: u64,
    pub schema_fingerprint: String,
    pub components: Vec<String>,
}

impl ModelBundle {
    pub fn new(schema: &SchemaDefinition) -> Self {
        ModelBundle {
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            schema_fingerprint: schema.fingerprint(),
            tokenizer: Tokenizer::default(),
            words: None,
            forward_lm: None,
            backward_lm: None,
            pos: None,
            concepts: None,
            relations: None,
        }
    }

    pub fn component_names(&self) -> Vec<&'static str> {
        let present = [
            self.words.is_some(),
            self.forward_lm.is_some(),
            self.backward_lm.is_some(),
            self.pos.is_some(),
            self.concepts.is_some(),
            self.relations.is_some(),
        ];
        COMPONENTS.iter().zip(present).filter(|(_, p)| *p).map(|(n, _)| *n).collect()
    }

    pub fn check_schema(&self, schema: &SchemaDefinition) -> Result<()> {
        let expected = schema.fingerprint();
        if self.schema_fingerprint != expected {
            return Err(Error::Fingerprint {
                found: self.schema_fingerprint.clone(),
                expected,
            });
        }
        Ok(())
    }

    /// Rebuilds an embedding stack from the bundle's artifacts.
    pub fn stack_for(&self, kinds: &[ProviderKind]) -> Result<EmbeddingStack> {
        let lms = || -> Result<(Arc<ContextualLm>, Arc<ContextualLm>)> {
            match (&self.forward_lm, &self.backward_lm) {
                (Some(f), Some(b)) => Ok((f.clone(), b.clone())),
                (None, _) => Err(Error::MissingComponent("charlm_forward")),
                (_, None) => Err(Error::MissingComponent("charlm_backward")),
            }
        };
        let providers = kinds
            .iter()
            .map(|k| match k {
                ProviderKind::Word => self
                    .words
                    .clone()
                    .map(EmbeddingProvider::Word)
                    .ok_or(Error::MissingComponent("words")),
                ProviderKind::Contextual => lms().map(|(forward, backward)| EmbeddingProvider::Contextual { forward, backward }),
                ProviderKind::Pooled { mode } => lms().map(|(forward, backward)| EmbeddingProvider::Pooled {
                    forward,
                    backward,
                    mode: *mode,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingStack::new(providers))
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format: "mexw".into(),
            version: MEXW_VERSION,
            created_by: format!("mex {}", env!("CARGO_PKG_VERSION")),
            created_unix: self.created_unix,
            schema_fingerprint: self.schema_fingerprint.clone(),
            tokenizer: TokenizerConfig {
                abbreviations: self.tokenizer.abbreviations().to_vec(),
            },
            components: Vec::new(),
        }
    }

    pub fn summary(&self) -> BundleSummary {
        let m = self.manifest();
        BundleSummary {
            status: "ok".into(),
            version: m.version,
            created_by: m.created_by,
            created_unix: m.created_unix,
            schema_fingerprint: m.schema_fingerprint,
            components: self.component_names().iter().map(|s| s.to_string()).collect(),
        }
    }

    fn encode_parts(&self) -> Result<Vec<(&'static str, Vec<u8>)>> {
        let mut out = Vec::new();
        if let Some(w) = &self.words {
            out.push(("words", encode_words(w)?));
        }
        if let Some(lm) = &self.forward_lm {
            out.push(("charlm_forward", encode_lm(lm)?));
        }
        if let Some(lm) = &self.backward_lm {
            out.push(("charlm_backward", encode_lm(lm)?));
        }
        if let Some(t) = &self.pos {
            out.push(("pos", encode_tagger(t)?));
        }
        if let Some(t) = &self.concepts {
            out.push(("concepts", encode_tagger(t)?));
        }
        if let Some(r) = &self.relations {
            out.push(("relations", encode_relations(r)?));
        }
        Ok(out
            .into_iter()
            .map(|(name, payload)| (name, encode_component(name, &payload)))
            .collect())
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn save_bundle(bundle: &ModelBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = bundle.manifest();
    for (name, bytes) in bundle.encode_parts()? {
        let file = format!("{name}.mexw");
        write(&dir.join(&file), &bytes)?;
        manifest.components.push(ComponentEntry {
            name: name.to_owned(),
            file,
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write(&dir.join(MANIFEST_FILE), json.as_bytes())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let manifest: Manifest = serde_json::from_slice(&read(&path)?)?;
    if manifest.version != MEXW_VERSION {
        return Err(Error::Version {
            found: manifest.version,
            expected: MEXW_VERSION,
        });
    }
    Ok(manifest)
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<ModelBundle> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut bundle = ModelBundle {
        created_unix: manifest.created_unix,
        schema_fingerprint: manifest.schema_fingerprint.clone(),
        tokenizer: Tokenizer::with_abbreviations(manifest.tokenizer.abbreviations.clone()),
        words: None,
        forward_lm: None,
        backward_lm: None,
        pos: None,
        concepts: None,
        relations: None,
    };
    let mut seen = BTreeMap::new();
    for entry in &manifest.components {
        let name = COMPONENTS
            .iter()
            .copied()
            .find(|n| *n == entry.name)
            .ok_or_else(|| Error::Format(format!("unknown bundle component {:?}", entry.name)))?;
        if seen.insert(name, ()).is_some() {
            return Err(Error::Format(format!("component {name} listed twice")));
        }
        let path = dir.join(&entry.file);
        if !path.exists() {
            return Err(Error::MissingComponent(name));
        }
        let bytes = read(&path)?;
        let payload = decode_component(&entry.file, name, &bytes)?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Checksum(entry.file.clone()));
        }
        let mut r = Reader::new(payload);
        match name {
            "words" => bundle.words = Some(Arc::new(decode_words(&mut r)?)),
            "charlm_forward" => bundle.forward_lm = Some(Arc::new(decode_lm(&mut r, Direction::Forward)?)),
            "charlm_backward" => bundle.backward_lm = Some(Arc::new(decode_lm(&mut r, Direction::Backward)?)),
            "pos" => bundle.pos = Some(decode_tagger(&mut r, TaggerTask::Pos)?),
            "concepts" => bundle.concepts = Some(decode_tagger(&mut r, TaggerTask::Concepts)?),
            _ => bundle.relations = Some(decode_relations(&mut r)?),
        }
        if !r.is_empty() {
            return Err(Error::Format(format!("{}: trailing bytes in payload", entry.file)));
        }
    }
    for t in bundle.pos.iter().chain(&bundle.concepts) {
        let stack = bundle.stack_for(&t.embeddings)?;
        if stack.dim() != t.input_dim() {
            return Err(Error::LengthMismatch(stack.dim(), t.input_dim()));
        }
    }
    if let Some(r) = &bundle.relations {
        let w = bundle.words.as_ref().ok_or(Error::MissingComponent("words"))?;
        if w.dim() != r.model.word_dim {
            return Err(Error::LengthMismatch(w.dim(), r.model.word_dim));
        }
    }
    Ok(bundle)
}

/// Loads a bundle and checks it against `schema`.
pub fn load_bundle_for(dir: impl AsRef<Path>, schema: &SchemaDefinition) -> Result<ModelBundle> {
    let bundle = load_bundle(dir)?;
    bundle.check_schema(schema)?;
    Ok(bundle)
}

#[derive(Serialize, Deserialize)]
struct WordsHeader {
    dim: usize,
    min_n: usize,
    max_n: usize,
    buckets: u32,
    seed: u64,
    vocab: Vec<(String, u64)>,
}

fn encode_words(m: &SubwordModel) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.header(&WordsHeader {
        dim: m.dim,
        min_n: m.min_n,
        max_n: m.max_n,
        buckets: m.buckets,
        seed: m.bucket_seed,
        vocab: m.vocab.iter().map(|e| (e.word.clone(), e.count)).collect(),
    })?;
    w.f64s(&m.word_in);
    w.f64s(&m.word_out);
    w.u32(m.bucket_rows.len() as u32);
    for (&b, row) in &m.bucket_rows {
        w.u32(b);
        w.f64s(row);
    }
    Ok(w.buf)
}

fn decode_words(r: &mut Reader) -> Result<SubwordModel> {
    let h: WordsHeader = r.header()?;
    let word_in = r.f64s()?;
    let word_out = r.f64s()?;
    let n = r.u32()?;
    let mut rows = BTreeMap::new();
    for _ in 0..n {
        let b = r.u32()?;
        rows.insert(b, r.f64s()?);
    }
    let vocab = h.vocab.into_iter().map(|(word, count)| VocabEntry { word, count }).collect();
    SubwordModel::from_parts((h.dim, h.min_n, h.max_n, h.buckets, h.seed), vocab, word_in, word_out, rows)
}

#[derive(Serialize, Deserialize)]
struct LmHeader {
    direction: Direction,
    alphabet: String,
    char_dim: usize,
    hidden: usize,
}

fn encode_lm(lm: &ContextualLm) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.header(&LmHeader {
        direction: lm.direction(),
        alphabet: lm.alphabet().iter().collect(),
        char_dim: lm.net.embed.ncols(),
        hidden: lm.hidden_size(),
    })?;
    w.params(&lm.net);
    Ok(w.buf)
}

fn decode_lm(r: &mut Reader, expected: Direction) -> Result<ContextualLm> {
    let h: LmHeader = r.header()?;
    if h.direction != expected {
        return Err(Error::Format(format!("language model direction is {:?}, expected {expected:?}", h.direction)));
    }
    let alphabet: Vec<char> = h.alphabet.chars().collect();
    let v = alphabet.len() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = CharLmNet {
        embed: Array2::zeros((v, h.char_dim)),
        lstm: Lstm::new(h.char_dim, h.hidden, &mut rng),
        proj: Linear::new(h.hidden, h.char_dim, &mut rng),
        out_bias: Array1::zeros(v),
    };
    r.params(&mut net)?;
    ContextualLm::from_parts(h.direction, alphabet, net)
}

#[derive(Serialize, Deserialize)]
struct TaggerHeader {
    task: TaggerTask,
    scheme: TagScheme,
    labels: LabelVocab,
    embeddings: Vec<ProviderKind>,
    input: usize,
    hidden: usize,
}

fn encode_tagger(t: &TaggerModel) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.header(&TaggerHeader {
        task: t.task,
        scheme: t.scheme,
        labels: t.labels.clone(),
        embeddings: t.embeddings.clone(),
        input: t.input_dim(),
        hidden: t.hidden_size(),
    })?;
    w.params(&t.net);
    Ok(w.buf)
}

fn decode_tagger(r: &mut Reader, expected: TaggerTask) -> Result<TaggerModel> {
    let h: TaggerHeader = r.header()?;
    if h.task != expected {
        return Err(Error::Format(format!("tagger task is {}, expected {}", h.task.as_str(), expected.as_str())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = TaggerNet::new(h.input, h.hidden, &h.labels, h.scheme, &mut rng);
    r.params(&mut net)?;
    TaggerModel::from_parts(h.task, h.scheme, h.labels, h.embeddings, net)
}

#[derive(Serialize, Deserialize)]
struct RelationHeader {
    classes: Vec<String>,
    concepts: Vec<String>,
    word_dim: usize,
    layout: RelationConfig,
    policy: CandidatePolicy,
    threshold: f64,
}

fn encode_relations(stage: &RelationStage) -> Result<Vec<u8>> {
    let m = &stage.model;
    let mut w = Writer::default();
    w.header(&RelationHeader {
        classes: m.classes.clone(),
        concepts: m.concepts.clone(),
        word_dim: m.word_dim,
        layout: m.layout(),
        policy: stage.policy.clone(),
        threshold: stage.threshold,
    })?;
    w.params(m);
    Ok(w.buf)
}

fn decode_relations(r: &mut Reader) -> Result<RelationStage> {
    let h: RelationHeader = r.header()?;
    let mut model = RelationModel::from_layout(h.classes, h.concepts, h.word_dim, &h.layout)?;
    r.params(&mut model)?;
    model.check()?;
    h.policy.validate()?;
    Ok(RelationStage {
        model,
        policy: h.policy,
        threshold: h.threshold,
    })
}
