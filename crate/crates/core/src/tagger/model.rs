use std::fmt::Write as _;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::crf::{crf_neg_log_likelihood, marginals, viterbi_decode};
use super::labels::LabelVocab;
use crate::corpus::ConllDocument;
use crate::embeddings::{stack_embeddings, EmbeddingStack, ProviderKind, StackState};
use crate::error::{Error, Result};
use crate::eval::{match_spans, token_accuracy, LabeledSpan, MatchMode};
use crate::nn::{dropout_mask, slice2, slice2_mut, zeros_like, Adam, Linear, Lstm, Params, Sgd};
use crate::scheme::{decode, TagScheme, OUTSIDE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaggerTask {
    Pos,
    Concepts,
}

impl TaggerTask {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pos" => Some(TaggerTask::Pos),
            "concepts" => Some(TaggerTask::Concepts),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaggerTask::Pos => "pos",
            TaggerTask::Concepts => "concepts",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: TaggerTask,
    pub scheme: TagScheme,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub anneal_factor: f64,
    /// Dev epochs without improvement before the learning rate is annealed.
    pub patience: usize,
    pub min_lr: f64,
    pub clip: f64,
    pub locked_dropout: f64,
    pub word_dropout: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(task: TaggerTask, seed: u64) -> Self {
        TrainConfig {
            task,
            scheme: TagScheme::Bioes,
            hidden: 256,
            epochs: 150,
            batch_size: 32,
            lr: 0.1,
            anneal_factor: 0.5,
            patience: 3,
            min_lr: 1e-3,
            clip: 5.0,
            locked_dropout: 0.5,
            word_dropout: 0.05,
            optimizer: Optimizer::Sgd,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.hidden > 0
            && self.batch_size > 0
            && self.lr > 0.0
            && self.anneal_factor > 0.0
            && self.anneal_factor < 1.0
            && self.clip > 0.0
            && (0.0..1.0).contains(&self.locked_dropout)
            && (0.0..1.0).contains(&self.word_dropout);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("tagger training parameters out of range".into()))
        }
    }
}

/// A tokenized sentence with one gold tag per token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

impl TaggedSentence {
    pub fn token_refs(&self) -> Vec<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }
}

/// Sentences of CoNLL documents with the column the task needs.
pub fn sentences_from_conll(docs: &[ConllDocument], task: TaggerTask) -> Vec<TaggedSentence> {
    docs.iter()
        .flat_map(|d| &d.sentences)
        .filter(|s| !s.is_empty())
        .map(|s| TaggedSentence {
            tokens: s.iter().map(|t| t.form.clone()).collect(),
            tags: s
                .iter()
                .map(|t| match task {
                    TaggerTask::Pos => t.pos.clone(),
                    TaggerTask::Concepts => t.tag.clone(),
                })
                .collect(),
        })
        .collect()
}

/// BiLSTM encoder, emission projection and CRF transitions.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct TaggerNet {
    pub(crate) fwd: Lstm,
    pub(crate) bwd: Lstm,
    pub(crate) proj: Linear,
    pub(crate) trans: Array2<f64>,
}

impl Params for TaggerNet {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = self.fwd.params();
        v.extend(self.bwd.params());
        v.extend(self.proj.params());
        v.push(slice2(&self.trans));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.fwd.params_mut();
        v.extend(self.bwd.params_mut());
        v.extend(self.proj.params_mut());
        v.push(slice2_mut(&mut self.trans));
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggerModel {
    pub task: TaggerTask,
    pub scheme: TagScheme,
    pub labels: LabelVocab,
    /// Provider layout of the embedding stack the model was trained on.
    pub embeddings: Vec<ProviderKind>,
    pub(crate) net: TaggerNet,
}

/// Masks for one training pass.
struct Noise<'a> {
    word: &'a [f64],
    locked: &'a [f64],
}

struct Pass {
    x: Array2<f64>,
    xr: Array2<f64>,
    tf: crate::nn::LstmTrace,
    tb: crate::nn::LstmTrace,
    h: Array2<f64>,
    emissions: Array2<f64>,
}

fn reversed(a: ArrayView2<f64>) -> Array2<f64> {
    a.slice(s![..;-1, ..]).to_owned()
}

impl TaggerNet {
    pub(crate) fn new(input: usize, hidden: usize, labels: &LabelVocab, scheme: TagScheme, rng: &mut ChaCha8Rng) -> Self {
        TaggerNet {
            fwd: Lstm::new(input, hidden, rng),
            bwd: Lstm::new(input, hidden, rng),
            proj: Linear::new(2 * hidden, labels.len(), rng),
            trans: labels.initial_transitions(scheme),
        }
    }

    fn forward(&self, x: ArrayView2<f64>, noise: Option<&Noise>) -> Pass {
        let mut x = x.to_owned();
        if let Some(n) = noise {
            for (mut row, &m) in x.rows_mut().into_iter().zip(n.word) {
                row *= m;
            }
        }
        let xr = reversed(x.view());
        let tf = self.fwd.forward(x.view());
        let tb = self.bwd.forward(xr.view());
        let mut h = concatenate(Axis(1), &[tf.hidden.view(), tb.hidden.slice(s![..;-1, ..])]).unwrap();
        if let Some(n) = noise {
            h *= &Array1::from(n.locked.to_vec());
        }
        let emissions = self.proj.forward(h.view());
        Pass {
            x,
            xr,
            tf,
            tb,
            h,
            emissions,
        }
    }

    /// Accumulates gradients of the CRF loss for `gold`; returns the loss.
    fn backward(&self, pass: &Pass, gold: &[usize], noise: Option<&Noise>, grad: &mut TaggerNet) -> Result<f64> {
        let crf = crf_neg_log_likelihood(pass.emissions.view(), self.trans.view(), gold)?;
        grad.trans += &crf.d_transitions;
        let mut dh = self.proj.backward(pass.h.view(), crf.d_emissions.view(), &mut grad.proj);
        if let Some(n) = noise {
            dh *= &Array1::from(n.locked.to_vec());
        }
        let hidden = self.fwd.hidden_size();
        self.fwd.backward(pass.x.view(), &pass.tf, dh.slice(s![.., ..hidden]), &mut grad.fwd);
        let dhb = reversed(dh.slice(s![.., hidden..]));
        self.bwd.backward(pass.xr.view(), &pass.tb, dhb.view(), &mut grad.bwd);
        Ok(crf.loss)
    }
}

/// One decoded concept span over token indices `[start, end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
    /// Mean marginal probability of the decoded tags over the span.
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Tags(Vec<String>),
    Spans(Vec<PredictedSpan>),
}

impl TaggerModel {
    pub fn input_dim(&self) -> usize {
        self.net.fwd.input_size()
    }

    pub fn hidden_size(&self) -> usize {
        self.net.fwd.hidden_size()
    }

    pub fn transitions(&self) -> &Array2<f64> {
        &self.net.trans
    }

    pub(crate) fn from_parts(
        task: TaggerTask,
        scheme: TagScheme,
        labels: LabelVocab,
        embeddings: Vec<ProviderKind>,
        net: TaggerNet,
    ) -> Result<Self> {
        let l = labels.len();
        let h = net.fwd.hidden_size();
        let consistent = net.proj.output_dim() == l
            && net.proj.input_dim() == 2 * h
            && net.bwd.hidden_size() == h
            && net.bwd.input_size() == net.fwd.input_size()
            && net.trans.dim() == (l + 2, l + 2);
        if !consistent {
            return Err(Error::Format("tagger tensor shapes are inconsistent".into()));
        }
        Ok(TaggerModel {
            task,
            scheme,
            labels,
            embeddings,
            net,
        })
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::LengthMismatch(x.ncols(), self.input_dim()));
        }
        Ok(())
    }

    /// Viterbi labels and per-token marginals for pre-computed embeddings.
    pub fn decode_embedded(&self, x: ArrayView2<f64>) -> Result<(Vec<usize>, Array2<f64>)> {
        self.check_input(x)?;
        if x.nrows() == 0 {
            return Ok((Vec::new(), Array2::zeros((0, self.labels.len()))));
        }
        let pass = self.net.forward(x, None);
        let (path, _) = viterbi_decode(pass.emissions.view(), self.net.trans.view())?;
        let probs = marginals(pass.emissions.view(), self.net.trans.view())?;
        Ok((path, probs))
    }

    pub fn predict_embedded(&self, x: ArrayView2<f64>) -> Result<Prediction> {
        let (path, probs) = self.decode_embedded(x)?;
        let tags = self.labels.decode(&path);
        Ok(match self.task {
            TaggerTask::Pos => Prediction::Tags(tags),
            TaggerTask::Concepts => Prediction::Spans(
                decode(&tags)
                    .into_iter()
                    .map(|sp| {
                        let conf = (sp.start..sp.end).map(|t| probs[[t, path[t]]]).sum::<f64>()
                            / (sp.end - sp.start) as f64;
                        PredictedSpan {
                            start: sp.start,
                            end: sp.end,
                            label: sp.label,
                            confidence: conf.clamp(0.0, 1.0),
                        }
                    })
                    .collect(),
            ),
        })
    }
}

/// Embeds, encodes and decodes one sentence.
pub fn predict(model: &TaggerModel, stack: &EmbeddingStack, state: &mut StackState, tokens: &[&str]) -> Result<Prediction> {
    if stack.kinds() != model.embeddings {
        return Err(Error::Config("embedding stack differs from the one the tagger was trained with".into()));
    }
    let x = stack_embeddings(stack, tokens, state)?;
    model.predict_embedded(x.view())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub dev_score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (1-based); `None` without training.
    pub best_epoch: Option<usize>,
    pub best_dev_score: f64,
    pub warnings: Vec<String>,
}

impl TrainingLog {
    pub fn to_text(&self) -> String {
        let mut out = String::from("epoch\tlr\ttrain_loss\tdev\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{}\t{:.6}\t{:.6}\t{:.4}", r.epoch, r.lr, r.train_loss, r.dev_score);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "# {w}");
        }
        out
    }
}

struct Prepared {
    x: Array2<f64>,
    gold: Vec<usize>,
}

/// Dev score of `model`: token accuracy for tags, strict micro F1 for spans.
fn dev_score(model: &TaggerModel, dev: &[Prepared]) -> Result<f64> {
    let mut gold_tags = Vec::new();
    let mut pred_tags = Vec::new();
    let mut counts = crate::eval::MatchCounts::default();
    for (i, d) in dev.iter().enumerate() {
        let (path, _) = model.decode_embedded(d.x.view())?;
        match model.task {
            TaggerTask::Pos => {
                gold_tags.extend_from_slice(&d.gold);
                pred_tags.extend(path);
            }
            TaggerTask::Concepts => {
                let to_spans = |ids: &[usize]| -> Vec<LabeledSpan> {
                    decode(&model.labels.decode(ids))
                        .into_iter()
                        // Offset by sentence so spans of different sentences never meet.
                        .map(|s| LabeledSpan::new(s.start + i * 100_000, s.end + i * 100_000, s.label))
                        .collect()
                };
                counts.merge(&match_spans(&to_spans(&d.gold), &to_spans(&path), MatchMode::Strict));
            }
        }
    }
    Ok(match model.task {
        TaggerTask::Pos => token_accuracy(&gold_tags, &pred_tags)?,
        TaggerTask::Concepts => counts.micro().f1(),
    })
}

fn prepare(
    sentences: &[TaggedSentence],
    labels: &LabelVocab,
    stack: &EmbeddingStack,
    state: &mut StackState,
    fallback: usize,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<Prepared>> {
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        if s.tokens.len() != s.tags.len() {
            return Err(Error::LengthMismatch(s.tokens.len(), s.tags.len()));
        }
        if s.tokens.is_empty() {
            continue;
        }
        let mut gold = Vec::with_capacity(s.tags.len());
        for t in &s.tags {
            match labels.index(t) {
                Some(i) => gold.push(i),
                None if strict => return Err(Error::Labels(format!("training label {t:?} is not in the label set"))),
                None => {
                    let w = format!("dev label {t:?} unseen in training, mapped to {:?}", labels.label(fallback));
                    if !warnings.contains(&w) {
                        log::warn!("{w}");
                        warnings.push(w);
                    }
                    gold.push(fallback);
                }
            }
        }
        let x = stack_embeddings(stack, &s.token_refs(), state)?;
        out.push(Prepared { x, gold });
    }
    Ok(out)
}

/// Trains a BiLSTM-CRF and returns the checkpoint with the best dev score.
/// `state` carries pooled-embedding memory; after training it holds the
/// memory accumulated over the training and dev corpora.
pub fn train_tagger(
    train: &[TaggedSentence],
    dev: &[TaggedSentence],
    labels: &LabelVocab,
    stack: &EmbeddingStack,
    state: &mut StackState,
    config: &TrainConfig,
) -> Result<(TaggerModel, TrainingLog)> {
    config.validate()?;
    if train.iter().all(|s| s.tokens.is_empty()) {
        return Err(Error::Corpus("empty training corpus".into()));
    }
    if labels.is_empty() {
        return Err(Error::Labels("empty label set".into()));
    }
    let mut log = TrainingLog::default();
    let fallback = match config.task {
        TaggerTask::Concepts => labels.index(OUTSIDE).unwrap_or(0),
        TaggerTask::Pos => {
            let mut counts = vec![0usize; labels.len()];
            for t in train.iter().flat_map(|s| &s.tags) {
                if let Some(i) = labels.index(t) {
                    counts[i] += 1;
                }
            }
            (0..counts.len()).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap_or(0)
        }
    };
    let train_data = prepare(train, labels, stack, state, fallback, true, &mut log.warnings)?;
    let dev_data = prepare(dev, labels, stack, state, fallback, false, &mut log.warnings)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = TaggerNet::new(stack.dim(), config.hidden, labels, config.scheme, &mut rng);
    let mut model = TaggerModel::from_parts(config.task, config.scheme, labels.clone(), stack.kinds(), net)?;
    if config.epochs == 0 {
        let w = "zero epochs requested; returning the untrained model".to_owned();
        log::warn!("{w}");
        log.warnings.push(w);
        return Ok((model, log));
    }

    let mut best = model.net.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut lr = config.lr;
    let mut bad_epochs = 0;
    let mut adam = Adam::new(config.lr);
    let mut grad = zeros_like(&model.net);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.zero();
            for &i in batch {
                let d = &train_data[i];
                let word = dropout_mask(d.x.nrows(), config.word_dropout, &mut rng)
                    .into_iter()
                    .map(|m| if m == 0.0 { 0.0 } else { 1.0 })
                    .collect::<Vec<_>>();
                let locked = dropout_mask(2 * config.hidden, config.locked_dropout, &mut rng);
                let noise = Noise {
                    word: &word,
                    locked: &locked,
                };
                let pass = model.net.forward(d.x.view(), Some(&noise));
                total += model.net.backward(&pass, &d.gold, Some(&noise), &mut grad)?;
            }
            grad.scale(1.0 / batch.len() as f64);
            grad.clip_norm(config.clip);
            match config.optimizer {
                Optimizer::Sgd => Sgd { lr }.step(&mut model.net, &grad),
                Optimizer::Adam => {
                    adam.lr = lr;
                    adam.step(&mut model.net, &grad)
                }
            }
        }
        if !model.net.all_finite() {
            return Err(Error::NonFinite("tagger parameters"));
        }
        let score = if dev_data.is_empty() {
            -total
        } else {
            dev_score(&model, &dev_data)?
        };
        log.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss: total / train_data.len() as f64,
            dev_score: score,
        });
        log::info!("epoch {epoch}: loss {:.4}, dev {score:.4}, lr {lr}", total / train_data.len() as f64);
        if score > best_score {
            best_score = score;
            best = model.net.clone();
            log.best_epoch = Some(epoch);
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= config.patience {
                lr *= config.anneal_factor;
                bad_epochs = 0;
            }
        }
        if lr < config.min_lr || (!dev_data.is_empty() && best_score >= 1.0) {
            break;
        }
    }
    model.net = best;
    log.best_dev_score = best_score;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{train_cbow, CbowConfig, EmbeddingProvider};
    use crate::nn::{max_relative_error, sample_coords};
    use std::sync::Arc;

    fn data() -> Vec<TaggedSentence> {
        let raw = [
            ("Prograf 5 mg morgens", "S-Medication B-Dosing E-Dosing O"),
            ("Im Sono kein Stau", "O S-DiagLab_Procedure O S-Medical_condition"),
            ("Sandimmun 2 mg abends", "S-Medication B-Dosing E-Dosing O"),
            ("Im Roentgen kein Infiltrat", "O S-DiagLab_Procedure O S-Medical_condition"),
        ];
        raw.iter()
            .map(|(t, g)| TaggedSentence {
                tokens: t.split(' ').map(str::to_owned).collect(),
                tags: g.split(' ').map(str::to_owned).collect(),
            })
            .collect()
    }

    fn stack() -> EmbeddingStack {
        let sents: Vec<Vec<String>> = data().into_iter().map(|s| s.tokens).collect();
        let cfg = CbowConfig {
            dim: 8,
            buckets: 500,
            min_count: 1,
            ..CbowConfig::default()
        };
        EmbeddingStack::new(vec![EmbeddingProvider::Word(Arc::new(train_cbow(&sents, &cfg).unwrap().0))])
    }

    fn config() -> TrainConfig {
        TrainConfig {
            hidden: 8,
            epochs: 40,
            batch_size: 2,
            optimizer: Optimizer::Adam,
            lr: 0.05,
            locked_dropout: 0.0,
            word_dropout: 0.0,
            ..TrainConfig::new(TaggerTask::Concepts, 5)
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let st = stack();
        let labels = LabelVocab::for_concepts(&crate::SchemaDefinition::shipped(), TagScheme::Bioes);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = TaggerNet::new(st.dim(), 4, &labels, TagScheme::Bioes, &mut rng);
        // Keep forbidden transitions out of the numeric range of interest.
        net.trans.mapv_inplace(|v| v.max(-5.0));
        let s = &data()[0];
        let x = stack_embeddings(&st, &s.token_refs(), &mut st.new_state()).unwrap();
        let gold = labels.encode(&s.tags).unwrap();
        let mut grad = zeros_like(&net);
        let pass = net.forward(x.view(), None);
        net.backward(&pass, &gold, None, &mut grad).unwrap();
        let coords: Vec<_> = sample_coords(&net, 10, &mut rng).concat();
        let loss = |n: &TaggerNet| {
            let p = n.forward(x.view(), None);
            crf_neg_log_likelihood(p.emissions.view(), n.trans.view(), &gold).unwrap().loss
        };
        let err = max_relative_error(&mut net, &grad, &coords, 1e-4, 1e-6, loss);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn learns_a_separable_toy_set_deterministically() {
        let st = stack();
        let labels = LabelVocab::for_concepts(&crate::SchemaDefinition::shipped(), TagScheme::Bioes);
        let (m1, log) = train_tagger(&data(), &data(), &labels, &st, &mut st.new_state(), &config()).unwrap();
        assert!(log.best_dev_score >= 0.95, "{}", log.to_text());
        let (m2, _) = train_tagger(&data(), &data(), &labels, &st, &mut st.new_state(), &config()).unwrap();
        assert_eq!(m1, m2);

        let toks = ["Prograf", "5", "mg", "morgens"];
        match predict(&m1, &st, &mut st.new_state(), &toks).unwrap() {
            Prediction::Spans(spans) => {
                assert_eq!(spans.len(), 2);
                assert!(spans.iter().all(|s| (0.0..=1.0).contains(&s.confidence)));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(predict(&m1, &st, &mut st.new_state(), &[]).unwrap(), Prediction::Spans(vec![]));
    }

    #[test]
    fn zero_epochs_and_errors() {
        let st = stack();
        let labels = LabelVocab::for_concepts(&crate::SchemaDefinition::shipped(), TagScheme::Bioes);
        let cfg = TrainConfig { epochs: 0, ..config() };
        let (_, log) = train_tagger(&data(), &[], &labels, &st, &mut st.new_state(), &cfg).unwrap();
        assert_eq!(log.warnings.len(), 1);
        assert!(train_tagger(&[], &[], &labels, &st, &mut st.new_state(), &cfg).is_err());
        let mut dev = data();
        dev[0].tags[3] = "S-Unknown".into();
        let (_, log) = train_tagger(&data(), &dev, &labels, &st, &mut st.new_state(), &TrainConfig { epochs: 1, ..config() }).unwrap();
        assert!(log.warnings.iter().any(|w| w.contains("S-Unknown")));
    }
}
