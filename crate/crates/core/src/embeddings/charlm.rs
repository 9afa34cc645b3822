//! Character-level language models whose hidden states serve as
//! contextual string embeddings.

use std::collections::{BTreeMap, HashMap};

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{slice1, slice1_mut, slice2, slice2_mut, uniform_matrix, Adam, Linear, Lstm, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharLmConfig {
    pub hidden: usize,
    pub char_dim: usize,
    pub max_alphabet: usize,
    /// Truncated backpropagation window in characters.
    pub bptt: usize,
    pub epochs: usize,
    pub lr: f64,
    pub clip: f64,
    /// Fraction of the text held out for validation.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for CharLmConfig {
    fn default() -> Self {
        CharLmConfig {
            hidden: 512,
            char_dim: 64,
            max_alphabet: 300,
            bptt: 256,
            epochs: 10,
            lr: 0.002,
            clip: 5.0,
            holdout: 0.1,
            seed: 1,
        }
    }
}

/// Embedding table shared by input and output, an LSTM, and a projection
/// from the hidden state into the embedding space.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct CharLmNet {
    pub(crate) embed: Array2<f64>,
    pub(crate) lstm: Lstm,
    pub(crate) proj: Linear,
    pub(crate) out_bias: Array1<f64>,
}

impl Params for CharLmNet {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = vec![slice2(&self.embed)];
        v.extend(self.lstm.params());
        v.extend(self.proj.params());
        v.push(slice1(&self.out_bias));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = vec![slice2_mut(&mut self.embed)];
        v.extend(self.lstm.params_mut());
        v.extend(self.proj.params_mut());
        v.push(slice1_mut(&mut self.out_bias));
        v
    }
}

impl CharLmNet {
    fn inputs(&self, ids: &[usize]) -> Array2<f64> {
        self.embed.select(Axis(0), ids)
    }

    /// Mean next-character cross-entropy of `ids`, with gradients when `grad` is given.
    fn loss(&self, ids: &[usize], grad: Option<&mut CharLmNet>) -> f64 {
        if ids.len() < 2 {
            return 0.0;
        }
        let n = ids.len() - 1;
        let x = self.inputs(&ids[..n]);
        let trace = self.lstm.forward(x.view());
        let z = self.proj.forward(trace.hidden.view());
        let mut logits = z.dot(&self.embed.t());
        logits += &self.out_bias;
        let mut loss = 0.0;
        for (t, mut row) in logits.axis_iter_mut(Axis(0)).enumerate() {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let zsum = row.sum();
            row /= zsum;
            loss -= row[ids[t + 1]].max(1e-300).ln();
        }
        let Some(grad) = grad else {
            return loss / n as f64;
        };
        // logits now hold probabilities; turn them into dL/dlogits.
        let mut dlogits = logits;
        for t in 0..n {
            dlogits[[t, ids[t + 1]]] -= 1.0;
        }
        dlogits /= n as f64;
        grad.embed += &dlogits.t().dot(&z);
        grad.out_bias += &dlogits.sum_axis(Axis(0));
        let dz = dlogits.dot(&self.embed);
        let dh = self.proj.backward(trace.hidden.view(), dz.view(), &mut grad.proj);
        let dx = self.lstm.backward(x.view(), &trace, dh.view(), &mut grad.lstm);
        for (t, &id) in ids[..n].iter().enumerate() {
            let mut row = grad.embed.row_mut(id);
            row += &dx.row(t);
        }
        loss / n as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextualLm {
    direction: Direction,
    alphabet: Vec<char>,
    index: HashMap<char, usize>,
    pub(crate) net: CharLmNet,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CharLmStats {
    pub train_loss: Vec<f64>,
    pub heldout_loss: Vec<f64>,
}

impl ContextualLm {
    pub(crate) fn from_parts(direction: Direction, alphabet: Vec<char>, net: CharLmNet) -> Result<Self> {
        if net.embed.nrows() != alphabet.len() + 1 || net.out_bias.len() != alphabet.len() + 1 {
            return Err(Error::Format("character table does not match alphabet".into()));
        }
        let index = alphabet.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(ContextualLm {
            direction,
            alphabet,
            index,
            net,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn hidden_size(&self) -> usize {
        self.net.lstm.hidden_size()
    }

    fn unk(&self) -> usize {
        self.alphabet.len()
    }

    /// Character ids in reading order for this direction.
    fn encode(&self, text: &str) -> Vec<usize> {
        let mut ids: Vec<usize> = text
            .chars()
            .map(|c| self.index.get(&c).copied().unwrap_or(self.unk()))
            .collect();
        if self.direction == Direction::Backward {
            ids.reverse();
        }
        ids
    }

    /// Mean next-character cross-entropy in nats.
    pub fn cross_entropy(&self, text: &str) -> f64 {
        self.net.loss(&self.encode(text), None)
    }

    pub fn perplexity(&self, text: &str) -> f64 {
        self.cross_entropy(text).exp()
    }

    /// Hidden states after every character of `text`, in text order
    /// (row `i` belongs to character `i`).
    pub fn hidden_states(&self, text: &str) -> Array2<f64> {
        let ids = self.encode(text);
        let mut h = self.net.lstm.forward(self.net.inputs(&ids).view()).hidden;
        if self.direction == Direction::Backward {
            h.invert_axis(Axis(0));
        }
        h
    }
}

/// Trains a character language model. The backward direction reads the text reversed.
pub fn train_char_lm(text: &str, direction: Direction, config: &CharLmConfig) -> Result<(ContextualLm, CharLmStats)> {
    if config.hidden == 0 || config.char_dim == 0 || config.bptt == 0 {
        return Err(Error::Config("char LM sizes must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.holdout) {
        return Err(Error::Config("holdout fraction must lie in [0, 1)".into()));
    }
    let mut freq: BTreeMap<char, usize> = BTreeMap::new();
    for c in text.chars() {
        *freq.entry(c).or_default() += 1;
    }
    if freq.is_empty() {
        return Err(Error::Config("empty training text".into()));
    }
    if freq.len() > config.max_alphabet {
        return Err(Error::Config(format!(
            "alphabet has {} characters, the cap is {}",
            freq.len(),
            config.max_alphabet
        )));
    }
    let alphabet: Vec<char> = freq.into_keys().collect();
    let v = alphabet.len() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = CharLmNet {
        embed: uniform_matrix(v, config.char_dim, 0.1, &mut rng),
        lstm: Lstm::new(config.char_dim, config.hidden, &mut rng),
        proj: Linear::new(config.hidden, config.char_dim, &mut rng),
        out_bias: Array1::zeros(v),
    };
    let mut lm = ContextualLm::from_parts(direction, alphabet, net)?;

    let ids = lm.encode(text);
    let cut = ids.len() - ((ids.len() as f64 * config.holdout) as usize).min(ids.len().saturating_sub(2));
    let (train, heldout) = ids.split_at(cut);
    let mut windows: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    while start + 1 < train.len() {
        let end = (start + config.bptt + 1).min(train.len());
        windows.push(&train[start..end]);
        start = end - 1;
    }

    let mut adam = Adam::new(config.lr);
    let mut grad = crate::nn::zeros_like(&lm.net);
    let mut stats = CharLmStats::default();
    for _ in 0..config.epochs {
        windows.shuffle(&mut rng);
        let mut total = 0.0;
        for w in &windows {
            grad.zero();
            total += lm.net.loss(w, Some(&mut grad));
            grad.clip_norm(config.clip);
            adam.step(&mut lm.net, &grad);
        }
        if !lm.net.all_finite() {
            return Err(Error::NonFinite("character language model"));
        }
        stats.train_loss.push(total / windows.len().max(1) as f64);
        stats.heldout_loss.push(heldout_loss(&lm.net, heldout, config.bptt));
    }
    Ok((lm, stats))
}

fn heldout_loss(net: &CharLmNet, ids: &[usize], bptt: usize) -> f64 {
    if ids.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut n = 0;
    let mut start = 0;
    while start + 1 < ids.len() {
        let end = (start + bptt + 1).min(ids.len());
        let len = end - start - 1;
        total += net.loss(&ids[start..end], None) * len as f64;
        n += len;
        start = end - 1;
    }
    total / n as f64
}

/// Per-token vectors: the forward state after the token's last character
/// concatenated with the backward state after its first character.
pub fn contextual_embed(forward: &ContextualLm, backward: &ContextualLm, tokens: &[&str]) -> Result<Array2<f64>> {
    if forward.direction != Direction::Forward || backward.direction != Direction::Backward {
        return Err(Error::Config("contextual embedding needs a forward and a backward model".into()));
    }
    let (hf, hb) = (forward.hidden_size(), backward.hidden_size());
    let mut out = Array2::zeros((tokens.len(), hf + hb));
    if tokens.is_empty() {
        return Ok(out);
    }
    let mut sentence = String::from(" ");
    let mut bounds = Vec::with_capacity(tokens.len());
    let mut pos = 1;
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            sentence.push(' ');
            pos += 1;
        }
        let len = tok.chars().count().max(1);
        if tok.is_empty() {
            sentence.push(' ');
        } else {
            sentence.push_str(tok);
        }
        bounds.push((pos, pos + len - 1));
        pos += len;
    }
    sentence.push(' ');
    let fwd = forward.hidden_states(&sentence);
    let bwd = backward.hidden_states(&sentence);
    for (i, &(first, last)) in bounds.iter().enumerate() {
        out.slice_mut(s![i, ..hf]).assign(&fwd.row(last));
        out.slice_mut(s![i, hf..]).assign(&bwd.row(first));
    }
    Ok(out)
}
