use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::candidates::{generate_candidates, CandidatePolicy, RelationCandidate, SentenceMentions};
use crate::embeddings::SubwordModel;
use crate::error::{Error, Result};
use crate::eval::{evaluate_relations, EvalReport, LabelPair, NO_RELATION};
use crate::nn::{
    dropout_mask, slice1, slice1_mut, slice2, slice2_mut, softmax, uniform_matrix, zeros_like, Adam, Linear, Params,
};
use crate::schema::SchemaDefinition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationConfig {
    pub filters: usize,
    pub windows: Vec<usize>,
    pub position_dim: usize,
    pub concept_dim: usize,
    pub max_offset: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip: f64,
    /// Concept-type embeddings in the token features.
    pub use_concepts: bool,
    pub seed: u64,
}

impl Default for RelationConfig {
    fn default() -> Self {
        RelationConfig {
            filters: 150,
            windows: vec![2, 3, 4, 5],
            position_dim: 25,
            concept_dim: 25,
            max_offset: 30,
            dropout: 0.5,
            epochs: 30,
            batch_size: 32,
            lr: 0.001,
            clip: 5.0,
            use_concepts: true,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Conv {
    pub(crate) w: Array2<f64>,
    pub(crate) b: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RelationNet {
    pub(crate) pos1: Array2<f64>,
    pub(crate) pos2: Array2<f64>,
    /// One row per concept type plus a final `NONE` row.
    pub(crate) concept: Array2<f64>,
    pub(crate) convs: Vec<Conv>,
    pub(crate) out: Linear,
}

impl Params for RelationNet {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = vec![slice2(&self.pos1), slice2(&self.pos2), slice2(&self.concept)];
        for c in &self.convs {
            v.push(slice2(&c.w));
            v.push(slice1(&c.b));
        }
        v.extend(self.out.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = vec![
            slice2_mut(&mut self.pos1),
            slice2_mut(&mut self.pos2),
            slice2_mut(&mut self.concept),
        ];
        for c in &mut self.convs {
            v.push(slice2_mut(&mut c.w));
            v.push(slice1_mut(&mut c.b));
        }
        v.extend(self.out.params_mut());
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationModel {
    /// Relation types in schema order followed by `NO_RELATION`.
    pub classes: Vec<String>,
    pub concepts: Vec<String>,
    pub word_dim: usize,
    pub max_offset: usize,
    pub windows: Vec<usize>,
    pub use_concepts: bool,
    pub(crate) net: RelationNet,
}

/// Token features of one candidate. The word block is fixed; table rows are
/// looked up by index at every forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub words: Array2<f64>,
    pub pos1: Vec<usize>,
    pub pos2: Vec<usize>,
    pub concept: Vec<usize>,
    pub roles: Vec<[f64; 2]>,
}

impl Features {
    pub fn len(&self) -> usize {
        self.pos1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos1.is_empty()
    }
}

/// Table row for a relative offset clipped to `[-max, max]`.
pub fn clip_offset(offset: i64, max: usize) -> usize {
    (offset.clamp(-(max as i64), max as i64) + max as i64) as usize
}

struct Pass {
    x: Array2<f64>,
    windows: Vec<Array2<f64>>,
    acts: Vec<Array2<f64>>,
    argmax: Vec<Vec<usize>>,
    hidden: Array2<f64>,
    probs: Vec<f64>,
}

impl RelationModel {
    pub fn new(schema: &SchemaDefinition, word_dim: usize, config: &RelationConfig) -> Result<Self> {
        let concepts: Vec<String> = schema.concept_names().map(str::to_owned).collect();
        let mut classes: Vec<String> = schema.relations().iter().map(|r| r.name.clone()).collect();
        classes.push(NO_RELATION.to_owned());
        Self::from_layout(classes, concepts, word_dim, config)
    }

    pub(crate) fn from_layout(
        classes: Vec<String>,
        concepts: Vec<String>,
        word_dim: usize,
        config: &RelationConfig,
    ) -> Result<Self> {
        if config.filters == 0 || config.windows.is_empty() || config.windows.contains(&0) {
            return Err(Error::Config("relation model needs filters and positive window sizes".into()));
        }
        if classes.last().map(String::as_str) != Some(NO_RELATION) {
            return Err(Error::Labels(format!("the last relation class must be {NO_RELATION}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c_dim = if config.use_concepts { config.concept_dim } else { 0 };
        let rows = 2 * config.max_offset + 1;
        let feat = word_dim + 2 * config.position_dim + c_dim + 2;
        let net = RelationNet {
            pos1: uniform_matrix(rows, config.position_dim, 0.1, &mut rng),
            pos2: uniform_matrix(rows, config.position_dim, 0.1, &mut rng),
            concept: uniform_matrix(concepts.len() + 1, c_dim, 0.1, &mut rng),
            convs: config
                .windows
                .iter()
                .map(|&w| {
                    let bound = 1.0 / ((w * feat) as f64).sqrt();
                    Conv {
                        w: uniform_matrix(config.filters, w * feat, bound, &mut rng),
                        b: Array1::zeros(config.filters),
                    }
                })
                .collect(),
            out: Linear::new(config.filters * config.windows.len(), classes.len(), &mut rng),
        };
        Ok(RelationModel {
            classes,
            concepts,
            word_dim,
            max_offset: config.max_offset,
            windows: config.windows.clone(),
            use_concepts: config.use_concepts,
            net,
        })
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = &self.net;
        let rows = 2 * self.max_offset + 1;
        let f = n.convs.first().map_or(0, |c| c.w.nrows());
        let feat = self.feature_dim();
        let ok = n.pos1.nrows() == rows
            && n.pos2.dim() == n.pos1.dim()
            && n.concept.nrows() == self.concepts.len() + 1
            && n.convs.len() == self.windows.len()
            && n.convs
                .iter()
                .zip(&self.windows)
                .all(|(c, &w)| c.w.dim() == (f, w * feat) && c.b.len() == f)
            && n.out.input_dim() == f * self.windows.len()
            && n.out.output_dim() == self.classes.len();
        if ok {
            Ok(())
        } else {
            Err(Error::Format("relation model tensor shapes are inconsistent".into()))
        }
    }

    /// Hyper-parameters that determine the tensor shapes.
    pub fn layout(&self) -> RelationConfig {
        RelationConfig {
            filters: self.net.out.input_dim() / self.windows.len(),
            windows: self.windows.clone(),
            position_dim: self.net.pos1.ncols(),
            concept_dim: self.net.concept.ncols(),
            max_offset: self.max_offset,
            use_concepts: self.use_concepts,
            ..RelationConfig::default()
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.word_dim + self.net.pos1.ncols() + self.net.pos2.ncols() + self.net.concept.ncols() + 2
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn no_relation(&self) -> usize {
        self.classes.len() - 1
    }

    /// Token features: word vector, both position lookups, the concept of
    /// the argument covering the token (or `NONE`), and argument-role flags.
    pub fn featurize(&self, cand: &RelationCandidate, words: &SubwordModel) -> Result<Features> {
        if words.dim() != self.word_dim {
            return Err(Error::LengthMismatch(words.dim(), self.word_dim));
        }
        let n = cand.tokens.len();
        let none = self.concepts.len();
        let concept_of = |name: &str| self.concepts.iter().position(|c| c == name).unwrap_or(none);
        let mut f = Features {
            words: Array2::zeros((n, self.word_dim)),
            pos1: Vec::with_capacity(n),
            pos2: Vec::with_capacity(n),
            concept: Vec::with_capacity(n),
            roles: Vec::with_capacity(n),
        };
        for (i, tok) in cand.tokens.iter().enumerate() {
            f.words.row_mut(i).assign(&Array1::from(words.embed_word(tok)));
            f.pos1.push(clip_offset(i as i64 - cand.arg1.start as i64, self.max_offset));
            f.pos2.push(clip_offset(i as i64 - cand.arg2.start as i64, self.max_offset));
            let in1 = (cand.arg1.start..cand.arg1.end).contains(&i);
            let in2 = (cand.arg2.start..cand.arg2.end).contains(&i);
            f.concept.push(if in1 {
                concept_of(&cand.arg1.concept)
            } else if in2 {
                concept_of(&cand.arg2.concept)
            } else {
                none
            });
            f.roles.push([in1 as u8 as f64, in2 as u8 as f64]);
        }
        Ok(f)
    }

    fn assemble(&self, f: &Features) -> Array2<f64> {
        let (dw, p, c) = (self.word_dim, self.net.pos1.ncols(), self.net.concept.ncols());
        let mut x = Array2::zeros((f.len(), self.feature_dim()));
        for i in 0..f.len() {
            let mut row = x.row_mut(i);
            row.slice_mut(s![..dw]).assign(&f.words.row(i));
            row.slice_mut(s![dw..dw + p]).assign(&self.net.pos1.row(f.pos1[i]));
            row.slice_mut(s![dw + p..dw + 2 * p]).assign(&self.net.pos2.row(f.pos2[i]));
            row.slice_mut(s![dw + 2 * p..dw + 2 * p + c]).assign(&self.net.concept.row(f.concept[i]));
            row[dw + 2 * p + c] = f.roles[i][0];
            row[dw + 2 * p + c + 1] = f.roles[i][1];
        }
        x
    }

    fn forward(&self, f: &Features, mask: Option<&[f64]>) -> Pass {
        let x = self.assemble(f);
        let n = x.nrows();
        let d = x.ncols();
        let mut pass = Pass {
            x,
            windows: Vec::new(),
            acts: Vec::new(),
            argmax: Vec::new(),
            hidden: Array2::zeros((1, self.net.out.input_dim())),
            probs: Vec::new(),
        };
        let mut col = 0;
        for (conv, &w) in self.net.convs.iter().zip(&self.windows) {
            // Only windows starting inside the sentence; short sentences get
            // one window padded with zero rows.
            let positions = if n >= w { n - w + 1 } else { 1 };
            let mut xw = Array2::zeros((positions, w * d));
            for i in 0..positions {
                for k in 0..w.min(n - i) {
                    xw.slice_mut(s![i, k * d..(k + 1) * d]).assign(&pass.x.row(i + k));
                }
            }
            let mut a = xw.dot(&conv.w.t());
            a += &conv.b;
            a.mapv_inplace(f64::tanh);
            let mut arg = vec![0usize; conv.w.nrows()];
            for j in 0..conv.w.nrows() {
                let mut best = f64::NEG_INFINITY;
                for i in 0..positions {
                    if a[[i, j]] > best {
                        best = a[[i, j]];
                        arg[j] = i;
                    }
                }
                pass.hidden[[0, col + j]] = best;
            }
            col += conv.w.nrows();
            pass.windows.push(xw);
            pass.acts.push(a);
            pass.argmax.push(arg);
        }
        if let Some(m) = mask {
            pass.hidden *= &ndarray::aview1(m);
        }
        let logits = self.net.out.forward(pass.hidden.view());
        pass.probs = softmax(logits.row(0).as_slice().unwrap());
        pass
    }

    /// Cross-entropy of `gold` with gradients accumulated into `grad`.
    fn backward(&self, f: &Features, pass: &Pass, gold: usize, mask: Option<&[f64]>, grad: &mut RelationNet) -> f64 {
        let loss = -pass.probs[gold].max(1e-300).ln();
        let mut dlogits = Array2::from_shape_vec((1, pass.probs.len()), pass.probs.clone()).unwrap();
        dlogits[[0, gold]] -= 1.0;
        let mut dh = self.net.out.backward(pass.hidden.view(), dlogits.view(), &mut grad.out);
        if let Some(m) = mask {
            dh *= &ndarray::aview1(m);
        }
        let n = pass.x.nrows();
        let d = pass.x.ncols();
        let mut dx = Array2::<f64>::zeros((n, d));
        let mut col = 0;
        for (ci, (conv, &w)) in self.net.convs.iter().zip(&self.windows).enumerate() {
            let g = &mut grad.convs[ci];
            for j in 0..conv.w.nrows() {
                let i = pass.argmax[ci][j];
                let a = pass.acts[ci][[i, j]];
                let dz = dh[[0, col + j]] * (1.0 - a * a);
                if dz == 0.0 {
                    continue;
                }
                g.b[j] += dz;
                g.w.row_mut(j).scaled_add(dz, &pass.windows[ci].row(i));
                for k in 0..w.min(n - i) {
                    dx.row_mut(i + k).scaled_add(dz, &conv.w.slice(s![j, k * d..(k + 1) * d]));
                }
            }
            col += conv.w.nrows();
        }
        let (dw, p, c) = (self.word_dim, self.net.pos1.ncols(), self.net.concept.ncols());
        for i in 0..n {
            let row = dx.row(i);
            grad.pos1.row_mut(f.pos1[i]).scaled_add(1.0, &row.slice(s![dw..dw + p]));
            grad.pos2.row_mut(f.pos2[i]).scaled_add(1.0, &row.slice(s![dw + p..dw + 2 * p]));
            grad.concept
                .row_mut(f.concept[i])
                .scaled_add(1.0, &row.slice(s![dw + 2 * p..dw + 2 * p + c]));
        }
        loss
    }

    /// Class distribution for one candidate.
    pub fn classify(&self, f: &Features) -> Result<Vec<f64>> {
        let probs = self.forward(f, None).probs;
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("relation model output"));
        }
        Ok(probs)
    }

    /// Cross-entropy of one candidate, without dropout.
    pub fn loss(&self, f: &Features, gold: usize) -> f64 {
        -self.forward(f, None).probs[gold].max(1e-300).ln()
    }

    /// Cross-entropy gradient of one candidate as a model-shaped buffer.
    pub fn gradient(&self, f: &Features, gold: usize) -> RelationModel {
        let mut g = self.clone();
        g.net.zero();
        let pass = self.forward(f, None);
        self.backward(f, &pass, gold, None, &mut g.net);
        g
    }

    pub fn predict_label(&self, f: &Features) -> Result<(usize, f64)> {
        let probs = self.classify(f)?;
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok((best, probs[best]))
    }
}

impl Params for RelationModel {
    fn params(&self) -> Vec<&[f64]> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.params_mut()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationTrainingLog {
    pub train_loss: Vec<f64>,
    pub dev_f1: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub best_dev_f1: f64,
}

fn featurize_all(model: &RelationModel, words: &SubwordModel, cands: &[RelationCandidate]) -> Result<Vec<(Features, usize)>> {
    cands
        .iter()
        .map(|c| {
            let gold = model
                .class_index(&c.label)
                .ok_or_else(|| Error::Labels(format!("unknown relation label {:?}", c.label)))?;
            Ok((model.featurize(c, words)?, gold))
        })
        .collect()
}

/// Micro/macro scores over candidates, `NO_RELATION` excluded.
pub fn evaluate_candidates(model: &RelationModel, words: &SubwordModel, cands: &[RelationCandidate]) -> Result<EvalReport> {
    let data = featurize_all(model, words, cands)?;
    score_prepared(model, &data)
}

fn score_prepared(model: &RelationModel, data: &[(Features, usize)]) -> Result<EvalReport> {
    let mut outcomes = Vec::with_capacity(data.len());
    for (f, gold) in data {
        let (pred, _) = model.predict_label(f)?;
        outcomes.push(LabelPair {
            gold: model.classes[*gold].clone(),
            predicted: model.classes[pred].clone(),
        });
    }
    Ok(evaluate_relations(&model.classes[..model.no_relation()], &outcomes, &[]))
}

/// Mini-batch Adam training with dev selection by micro F1 over the
/// relation classes.
pub fn train_relation_model(
    train: &[RelationCandidate],
    dev: &[RelationCandidate],
    words: &SubwordModel,
    schema: &SchemaDefinition,
    config: &RelationConfig,
) -> Result<(RelationModel, RelationTrainingLog)> {
    if !(0.0..1.0).contains(&config.dropout) || config.batch_size == 0 || !(config.lr > 0.0) {
        return Err(Error::Config("relation training parameters out of range".into()));
    }
    let mut model = RelationModel::new(schema, words.dim(), config)?;
    let train_data = featurize_all(&model, words, train)?;
    let dev_data = featurize_all(&model, words, dev)?;
    let mut labels: Vec<usize> = train_data.iter().map(|(_, g)| *g).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(Error::Corpus("relation training set has fewer than two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_0F_C4A5);
    let mut adam = Adam::new(config.lr);
    let mut grad = zeros_like(&model.net);
    let mut log = RelationTrainingLog::default();
    let mut best = model.net.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let width = model.net.out.input_dim();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.zero();
            for &i in batch {
                let (f, gold) = &train_data[i];
                let mask = dropout_mask(width, config.dropout, &mut rng);
                let pass = model.forward(f, Some(&mask));
                total += model.backward(f, &pass, *gold, Some(&mask), &mut grad);
            }
            grad.scale(1.0 / batch.len() as f64);
            grad.clip_norm(config.clip);
            adam.step(&mut model.net, &grad);
        }
        if !model.net.all_finite() {
            return Err(Error::NonFinite("relation model parameters"));
        }
        let f1 = if dev_data.is_empty() {
            -total
        } else {
            score_prepared(&model, &dev_data)?.micro.f1
        };
        log.train_loss.push(total / train_data.len() as f64);
        log.dev_f1.push(f1);
        log::info!("relation epoch {epoch}: loss {:.4}, dev F1 {f1:.4}", total / train_data.len() as f64);
        if f1 > best_f1 {
            best_f1 = f1;
            best = model.net.clone();
            log.best_epoch = Some(epoch);
        }
        if !dev_data.is_empty() && best_f1 >= 1.0 {
            break;
        }
    }
    model.net = best;
    log.best_dev_f1 = best_f1;
    Ok((model, log))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedRelation {
    pub relation: String,
    pub arg1: String,
    pub arg2: String,
    pub confidence: f64,
}

/// Classifies every candidate pair of the sentence's mentions and keeps
/// relations whose probability reaches `threshold`.
pub fn predict_relations(
    model: &RelationModel,
    words: &SubwordModel,
    sentence: &SentenceMentions,
    policy: &CandidatePolicy,
    schema: &SchemaDefinition,
    threshold: f64,
) -> Result<Vec<PredictedRelation>> {
    let unlabeled = SentenceMentions {
        relations: Vec::new(),
        ..sentence.clone()
    };
    let policy = CandidatePolicy {
        negative_ratio: 1.0,
        ..policy.clone()
    };
    let mut out = Vec::new();
    for cand in generate_candidates(&unlabeled, &policy, schema) {
        let (label, p) = model.predict_label(&model.featurize(&cand, words)?)?;
        if label != model.no_relation() && p >= threshold {
            out.push(PredictedRelation {
                relation: model.classes[label].clone(),
                arg1: cand.arg1.id,
                arg2: cand.arg2.id,
                confidence: p.clamp(0.0, 1.0),
            });
        }
    }
    Ok(out)
}
