use std::ffi::OsString;
use std::fs;
use std::io::Read;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::annotate::{annotate, OutputFormat};
use super::bundle::{load_bundle, save_bundle, ModelBundle, RelationStage, MANIFEST_FILE};
use super::pipeline::{
    corpus_conll, corpus_text, evaluate_relation_model, evaluate_tagger, prepare_corpus, relation_candidates,
    token_sentences, TaggerScores,
};
use super::serve::{serve, DEFAULT_MAX_BODY};
use super::synth::{synth_corpus, SyntheticSpec};
use crate::corpus::{read_conll, read_corpus_dir, AnnotatedDocument, NormalizationPolicy, UnknownNames};
use crate::embeddings::{
    save_mexe, train_cbow, train_char_lm, CbowConfig, CharLmConfig, Direction, PoolingMode, ProviderKind,
};
use crate::error::{Error, Result};
use crate::eval::{char_level_iaa, make_folds, Fold, DEFAULT_RATIOS};
use crate::relation::{train_relation_model, CandidatePolicy, RelationConfig};
use crate::schema::SchemaDefinition;
use crate::scheme::TagScheme;
use crate::tagger::{sentences_from_conll, train_tagger, LabelVocab, Optimizer, TaggerTask, TrainConfig};

pub const BUNDLE_ENV: &str = "MEX_BUNDLE";

#[derive(Parser)]
#[command(name = "mex", version, about = "Information extraction for German clinical text")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Schema file; the shipped schema when absent.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus.
    Synth(SynthArgs),
    /// Cross-validation folds and CoNLL files for one fold.
    Split(SplitArgs),
    /// Character-level agreement between annotators.
    Iaa(IaaArgs),
    /// Train subword CBOW embeddings into a bundle.
    TrainEmbeddings(EmbeddingArgs),
    /// Train character language models into a bundle.
    TrainCharlm(CharLmArgs),
    /// Train a part-of-speech or concept tagger into a bundle.
    TrainTagger(TaggerArgs),
    /// Train the relation classifier into a bundle.
    TrainRelations(RelationArgs),
    /// Score a bundle on held-out data.
    Evaluate(EvaluateArgs),
    /// Annotate a text file.
    Annotate(AnnotateArgs),
    /// Serve a bundle over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Annotator directory to use; the first one when absent.
    #[arg(long)]
    annotator: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// JSON generator specification.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    documents: Option<usize>,
    #[arg(long)]
    summary_fraction: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    perturbation: Option<f64>,
    #[arg(long)]
    single_annotator: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Bio,
    Bioes,
}

impl From<SchemeArg> for TagScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Bio => TagScheme::Bio,
            SchemeArg::Bioes => TagScheme::Bioes,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[arg(long, value_enum, default_value = "bioes")]
    scheme: SchemeArg,
}

#[derive(Args)]
struct IaaArgs {
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args)]
struct EmbeddingArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 2)]
    min_count: u64,
    #[arg(long, default_value_t = 2_000_000)]
    buckets: u32,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Also write the vectors as a standalone embedding file.
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
    Both,
}

#[derive(Args)]
struct CharLmArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    direction: DirectionArg,
    #[arg(long, default_value_t = 512)]
    hidden: usize,
    #[arg(long, default_value_t = 64)]
    char_dim: usize,
    #[arg(long, default_value_t = 256)]
    bptt: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.002)]
    lr: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Pos,
    Concepts,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Args)]
struct TaggerArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Comma-separated providers: word, contextual, pooled.
    #[arg(long, default_value = "word")]
    embeddings: String,
    #[arg(long, default_value = "mean")]
    pooling: String,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_enum, default_value = "bioes")]
    scheme: SchemeArg,
    /// Per-epoch training log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct RelationArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Directory written by `split`.
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value_t = 150)]
    filters: usize,
    #[arg(long, default_value = "2,3,4,5")]
    windows: String,
    #[arg(long, default_value_t = 25)]
    position_dim: usize,
    #[arg(long, default_value_t = 25)]
    concept_dim: usize,
    #[arg(long, default_value_t = 30)]
    max_offset: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    /// Leave concept-type embeddings out of the features.
    #[arg(long)]
    no_concepts: bool,
    #[arg(long, default_value_t = 50)]
    max_distance: usize,
    #[arg(long, default_value_t = 1.0)]
    negative_ratio: f64,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Lenient,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, env = BUNDLE_ENV)]
    bundle: PathBuf,
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
    /// CoNLL file for the taggers.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Corpus and split directory for the relation model.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    annotator: Option<String>,
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Standoff,
    Conll,
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long, env = BUNDLE_ENV)]
    bundle: PathBuf,
    /// Input text file, `-` for standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = BUNDLE_ENV)]
    bundle: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value_t = DEFAULT_MAX_BODY)]
    max_body: usize,
}

/// Exit code for a failed command: 2 for internal faults, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) | Error::LengthMismatch(..) => 2,
        _ => 1,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            2
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_schema(path: &Option<PathBuf>) -> Result<SchemaDefinition> {
    match path {
        Some(p) => SchemaDefinition::load(p),
        None => Ok(SchemaDefinition::shipped()),
    }
}

/// Tokenized, normalized documents of one annotator.
fn load_corpus(args: &CorpusArgs, schema: &SchemaDefinition) -> Result<Vec<AnnotatedDocument>> {
    let docs = read_corpus_dir(&args.corpus, schema, UnknownNames::Reject)?;
    let annotator = match &args.annotator {
        Some(a) => a.clone(),
        None => docs
            .first()
            .map(|d| d.annotator_id.clone())
            .ok_or_else(|| Error::Corpus(format!("{}: no documents", args.corpus.display())))?,
    };
    let mine: Vec<AnnotatedDocument> = docs.into_iter().filter(|d| d.annotator_id == annotator).collect();
    if mine.is_empty() {
        return Err(Error::Corpus(format!("no documents for annotator {annotator}")));
    }
    let (docs, report) = prepare_corpus(&mine, &Default::default(), &NormalizationPolicy::default());
    if !report.is_zero() {
        log::info!("normalization: {report:?}");
    }
    Ok(docs)
}

/// The bundle in `dir`, or a fresh one when the directory has no manifest.
fn open_bundle(dir: &Path, schema: &SchemaDefinition) -> Result<ModelBundle> {
    if dir.join(MANIFEST_FILE).exists() {
        let b = load_bundle(dir)?;
        b.check_schema(schema)?;
        Ok(b)
    } else {
        Ok(ModelBundle::new(schema))
    }
}

fn run(cli: Cli) -> Result<()> {
    let schema = load_schema(&cli.schema)?;
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => {
            let mut spec = match &a.spec {
                Some(p) => serde_json::from_str(&read_text(p)?)?,
                None => SyntheticSpec::default(),
            };
            spec.seed = seed;
            if let Some(n) = a.documents {
                spec.documents = n;
            }
            if let Some(f) = a.summary_fraction {
                spec.summary_fraction = f;
            }
            if let Some(r) = a.noise {
                spec.noise_rate = r;
            }
            if let Some(r) = a.perturbation {
                spec.perturbation_rate = r;
            }
            spec.second_annotator &= !a.single_annotator;
            let report = synth_corpus(&spec, &schema, &a.out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Split(a) => {
            let docs = load_corpus(&a.corpus, &schema)?;
            let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
            let plan = make_folds(&ids, a.folds, DEFAULT_RATIOS, seed)?;
            let fold = plan
                .folds
                .get(a.fold)
                .ok_or_else(|| Error::Config(format!("fold {} of {}", a.fold, a.folds)))?;
            write_text(&a.out.join("plan.json"), &serde_json::to_string_pretty(&plan)?)?;
            write_text(&a.out.join("split.json"), &serde_json::to_string_pretty(fold)?)?;
            for (name, part) in [("train", &fold.train), ("dev", &fold.dev), ("test", &fold.test)] {
                let chosen: Vec<AnnotatedDocument> = docs.iter().filter(|d| part.contains(&d.doc_id)).cloned().collect();
                write_text(&a.out.join(format!("{name}.conll")), &corpus_conll(&chosen, a.scheme.into())?)?;
                println!("{name}: {} documents", chosen.len());
            }
        }
        Command::Iaa(a) => {
            let docs = read_corpus_dir(&a.corpus, &schema, UnknownNames::Reject)?;
            println!("{}", serde_json::to_string_pretty(&char_level_iaa(&docs))?);
        }
        Command::TrainEmbeddings(a) => {
            let docs = load_corpus(&a.corpus, &schema)?;
            let config = CbowConfig {
                dim: a.dim,
                window: a.window,
                negatives: a.negatives,
                epochs: a.epochs,
                lr: a.lr,
                min_count: a.min_count,
                buckets: a.buckets,
                seed,
                ..CbowConfig::default()
            };
            let (model, stats) = train_cbow(&token_sentences(&docs), &config)?;
            for (i, l) in stats.epoch_loss.iter().enumerate() {
                println!("epoch {}: loss {l:.4}", i + 1);
            }
            if let Some(p) = &a.export {
                save_mexe(&model, p)?;
            }
            let mut bundle = open_bundle(&a.bundle, &schema)?;
            bundle.words = Some(model.into());
            save_bundle(&bundle, &a.bundle)?;
        }
        Command::TrainCharlm(a) => {
            let docs = load_corpus(&a.corpus, &schema)?;
            let text = corpus_text(&docs);
            let config = CharLmConfig {
                hidden: a.hidden,
                char_dim: a.char_dim,
                bptt: a.bptt,
                epochs: a.epochs,
                lr: a.lr,
                seed,
                ..CharLmConfig::default()
            };
            let mut bundle = open_bundle(&a.bundle, &schema)?;
            if a.direction != DirectionArg::Backward {
                let (lm, stats) = train_char_lm(&text, Direction::Forward, &config)?;
                println!("forward: held-out loss {:.4}", stats.heldout_loss.last().copied().unwrap_or(f64::NAN));
                bundle.forward_lm = Some(lm.into());
            }
            if a.direction != DirectionArg::Forward {
                let (lm, stats) = train_char_lm(&text, Direction::Backward, &config)?;
                println!("backward: held-out loss {:.4}", stats.heldout_loss.last().copied().unwrap_or(f64::NAN));
                bundle.backward_lm = Some(lm.into());
            }
            save_bundle(&bundle, &a.bundle)?;
        }
        Command::TrainTagger(a) => train_tagger_cmd(a, &schema, seed)?,
        Command::TrainRelations(a) => {
            let docs = load_corpus(&a.corpus, &schema)?;
            let fold: Fold = serde_json::from_str(&read_text(&a.split.join("split.json"))?)?;
            let pick = |ids: &[String]| -> Vec<AnnotatedDocument> {
                docs.iter().filter(|d| ids.contains(&d.doc_id)).cloned().collect()
            };
            let policy = CandidatePolicy {
                max_distance: a.max_distance,
                negative_ratio: a.negative_ratio,
                seed,
                ..CandidatePolicy::default()
            };
            policy.validate()?;
            let train = relation_candidates(&pick(&fold.train), &policy, &schema);
            let dev = relation_candidates(&pick(&fold.dev), &CandidatePolicy { negative_ratio: 1.0, ..policy.clone() }, &schema);
            let windows = a
                .windows
                .split(',')
                .map(|w| w.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad window size {w:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let config = RelationConfig {
                filters: a.filters,
                windows,
                position_dim: a.position_dim,
                concept_dim: a.concept_dim,
                max_offset: a.max_offset,
                dropout: a.dropout,
                epochs: a.epochs,
                batch_size: a.batch_size,
                lr: a.lr,
                use_concepts: !a.no_concepts,
                seed,
                ..RelationConfig::default()
            };
            let mut bundle = open_bundle(&a.bundle, &schema)?;
            let words = bundle.words.clone().ok_or(Error::MissingComponent("words"))?;
            let (model, log) = train_relation_model(&train, &dev, &words, &schema, &config)?;
            for (i, (l, f)) in log.train_loss.iter().zip(&log.dev_f1).enumerate() {
                println!("epoch {}: loss {l:.4} dev F1 {f:.4}", i + 1);
            }
            bundle.relations = Some(RelationStage {
                model,
                policy,
                threshold: a.threshold,
            });
            save_bundle(&bundle, &a.bundle)?;
        }
        Command::Evaluate(a) => evaluate_cmd(a, &schema)?,
        Command::Annotate(a) => {
            let bundle = load_bundle(&a.bundle)?;
            let text = if a.input.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| Error::io("<stdin>", e))?;
                s
            } else {
                read_text(&a.input)?
            };
            let format = match a.format {
                FormatArg::Json => OutputFormat::Json,
                FormatArg::Standoff => OutputFormat::Standoff,
                FormatArg::Conll => OutputFormat::Conll,
            };
            let out = annotate(&bundle, &schema, &text)?.render(format)?;
            match &a.output {
                Some(p) => write_text(p, &out)?,
                None => print!("{out}"),
            }
        }
        Command::Serve(a) => {
            let bundle = load_bundle(&a.bundle)?;
            serve(bundle, schema, &a.host, a.port, a.max_body)?;
        }
    }
    Ok(())
}

fn parse_providers(list: &str, pooling: &str) -> Result<Vec<ProviderKind>> {
    list.split(',')
        .map(|p| match p.trim() {
            "word" => Ok(ProviderKind::Word),
            "contextual" => Ok(ProviderKind::Contextual),
            "pooled" => PoolingMode::parse(pooling)
                .map(|mode| ProviderKind::Pooled { mode })
                .ok_or_else(|| Error::Config(format!("unknown pooling mode {pooling:?}"))),
            other => Err(Error::Config(format!("unknown embedding provider {other:?}"))),
        })
        .collect()
}

fn train_tagger_cmd(a: TaggerArgs, schema: &SchemaDefinition, seed: u64) -> Result<()> {
    let task = match a.task {
        TaskArg::Pos => TaggerTask::Pos,
        TaskArg::Concepts => TaggerTask::Concepts,
    };
    let train = sentences_from_conll(&read_conll(&read_text(&a.train)?)?, task);
    let dev = sentences_from_conll(&read_conll(&read_text(&a.dev)?)?, task);
    let mut config = TrainConfig::new(task, seed);
    config.scheme = a.scheme.into();
    if let Some(v) = a.hidden {
        config.hidden = v;
    }
    if let Some(v) = a.epochs {
        config.epochs = v;
    }
    if let Some(v) = a.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = a.lr {
        config.lr = v;
    }
    if let Some(v) = a.patience {
        config.patience = v;
    }
    if let Some(o) = a.optimizer {
        config.optimizer = match o {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Adam => Optimizer::Adam,
        };
    }
    let labels = match task {
        TaggerTask::Concepts => LabelVocab::for_concepts(schema, config.scheme),
        TaggerTask::Pos => LabelVocab::from_tags(train.iter().flat_map(|s| s.tags.iter().map(String::as_str))),
    };
    let mut bundle = open_bundle(&a.bundle, schema)?;
    let stack = bundle.stack_for(&parse_providers(&a.embeddings, &a.pooling)?)?;
    let mut state = stack.new_state();
    let (model, log) = train_tagger(&train, &dev, &labels, &stack, &mut state, &config)?;
    let text = log.to_text();
    print!("{text}");
    if let Some(p) = &a.log {
        write_text(p, &text)?;
    }
    match task {
        TaggerTask::Pos => bundle.pos = Some(model),
        TaggerTask::Concepts => bundle.concepts = Some(model),
    }
    save_bundle(&bundle, &a.bundle)
}

fn evaluate_cmd(a: EvaluateArgs, schema: &SchemaDefinition) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    bundle.check_schema(schema)?;
    if let Some(test) = &a.test {
        let docs = read_conll(&read_text(test)?)?;
        for (task, model) in [(TaggerTask::Pos, &bundle.pos), (TaggerTask::Concepts, &bundle.concepts)] {
            let Some(model) = model else { continue };
            let stack = bundle.stack_for(&model.embeddings)?;
            match evaluate_tagger(model, &stack, &sentences_from_conll(&docs, task))? {
                TaggerScores::Pos { accuracy, tokens } => println!("pos accuracy: {accuracy:.4} ({tokens} tokens)"),
                TaggerScores::Concepts { strict, lenient } => {
                    let (name, report) = match a.mode {
                        ModeArg::Strict => ("strict", strict),
                        ModeArg::Lenient => ("lenient", lenient),
                    };
                    print!("{}", report.to_table());
                    println!(
                        "concepts micro F1 ({name}): {:.4} precision {:.4} recall {:.4}",
                        report.micro.f1, report.micro.precision, report.micro.recall
                    );
                }
            }
        }
    }
    if let (Some(corpus), Some(split)) = (&a.corpus, &a.split) {
        let stage = bundle.relations.as_ref().ok_or(Error::MissingComponent("relations"))?;
        let words = bundle.words.as_ref().ok_or(Error::MissingComponent("words"))?;
        let docs = load_corpus(
            &CorpusArgs {
                corpus: corpus.clone(),
                annotator: a.annotator.clone(),
            },
            schema,
        )?;
        let fold: Fold = serde_json::from_str(&read_text(&split.join("split.json"))?)?;
        let test: Vec<AnnotatedDocument> = docs.into_iter().filter(|d| fold.test.contains(&d.doc_id)).collect();
        let report = evaluate_relation_model(&stage.model, words, &test, &stage.policy, schema)?;
        print!("{}", report.to_table());
        println!("relations micro F1: {:.4}", report.micro.f1);
    }
    Ok(())
}
