//! Word vectors composed from hashed character n-grams, trained with the
//! CBOW objective and negative sampling.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NEGATIVE_TABLE_SIZE: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbowConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_count: u64,
    pub buckets: u32,
    pub min_n: usize,
    pub max_n: usize,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.05,
            min_count: 2,
            buckets: 2_000_000,
            min_n: 3,
            max_n: 6,
            seed: 1,
        }
    }
}

impl CbowConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim == 0 {
            return bad("embedding dimension must be positive");
        }
        if self.negatives == 0 {
            return bad("at least one negative sample is required");
        }
        if self.window == 0 {
            return bad("window must be positive");
        }
        if self.buckets == 0 {
            return bad("bucket count must be positive");
        }
        if self.min_n == 0 || self.min_n > self.max_n {
            return bad("n-gram range must satisfy 1 <= min_n <= max_n");
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }
}

/// 32-bit FNV-1a over UTF-8 bytes.
pub fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for &b in bytes {
        h ^= b as u32;
        h = h.wrapping_mul(16_777_619);
    }
    h
}

/// Character n-grams of `<word>` with lengths in `[min_n, max_n]`.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in min_n..=max_n {
        if n > wrapped.len() {
            break;
        }
        for start in 0..=wrapped.len() - n {
            out.push(wrapped[start..start + n].iter().collect());
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub word: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubwordModel {
    pub(crate) dim: usize,
    pub(crate) min_n: usize,
    pub(crate) max_n: usize,
    pub(crate) buckets: u32,
    /// Seeds the lazily initialized bucket rows.
    pub(crate) bucket_seed: u64,
    pub(crate) vocab: Vec<VocabEntry>,
    index: HashMap<String, usize>,
    pub(crate) word_in: Vec<f64>,
    pub(crate) word_out: Vec<f64>,
    /// Bucket rows that differ from their deterministic initial value.
    pub(crate) bucket_rows: BTreeMap<u32, Vec<f64>>,
    subwords: Vec<Vec<u32>>,
}

/// One trainable scalar of a [`SubwordModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamRef {
    WordIn(usize, usize),
    WordOut(usize, usize),
    Bucket(u32, usize),
}

/// One CBOW training example: context word indices, target, negatives.
#[derive(Clone, Debug)]
pub struct CbowExample {
    pub context: Vec<usize>,
    pub target: usize,
    pub negatives: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CbowStats {
    pub epochs_run: usize,
    /// Mean example loss per epoch.
    pub epoch_loss: Vec<f64>,
}

struct ExampleGrad {
    loss: f64,
    /// dL/dh for the averaged context vector.
    hidden: Vec<f64>,
    /// dL/du for each scored output row.
    outputs: Vec<(usize, Vec<f64>)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl SubwordModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[VocabEntry] {
        &self.vocab
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn bucket_count(&self) -> u32 {
        self.buckets
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.min_n, self.max_n)
    }

    /// Bucket ids of `word`'s n-grams.
    pub fn ngram_buckets(&self, word: &str) -> Vec<u32> {
        char_ngrams(word, self.min_n, self.max_n)
            .iter()
            .map(|g| fnv1a(g.as_bytes()) % self.buckets)
            .collect()
    }

    pub(crate) fn from_parts(
        config: (usize, usize, usize, u32, u64),
        vocab: Vec<VocabEntry>,
        word_in: Vec<f64>,
        word_out: Vec<f64>,
        bucket_rows: BTreeMap<u32, Vec<f64>>,
    ) -> Result<Self> {
        let (dim, min_n, max_n, buckets, bucket_seed) = config;
        let n = vocab.len();
        if word_in.len() != n * dim || word_out.len() != n * dim {
            return Err(Error::Format("word matrix size does not match vocabulary".into()));
        }
        if bucket_rows.iter().any(|(&b, r)| b >= buckets || r.len() != dim) {
            return Err(Error::Format("bucket row out of range".into()));
        }
        let mut m = SubwordModel {
            dim,
            min_n,
            max_n,
            buckets,
            bucket_seed,
            vocab,
            index: HashMap::new(),
            word_in,
            word_out,
            bucket_rows,
            subwords: Vec::new(),
        };
        m.reindex();
        Ok(m)
    }

    fn reindex(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        self.subwords = self.vocab.iter().map(|e| self.ngram_buckets(&e.word)).collect();
    }

    fn initial_bucket_row(&self, bucket: u32) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.bucket_seed ^ (bucket as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let bound = 1.0 / self.dim as f64;
        (0..self.dim).map(|_| rng.random_range(-bound..bound)).collect()
    }

    /// Current value of a bucket row (initial value if never trained).
    pub fn bucket_row(&self, bucket: u32) -> Vec<f64> {
        self.bucket_rows
            .get(&bucket)
            .cloned()
            .unwrap_or_else(|| self.initial_bucket_row(bucket))
    }

    fn bucket_row_mut(&mut self, bucket: u32) -> &mut Vec<f64> {
        if !self.bucket_rows.contains_key(&bucket) {
            let row = self.initial_bucket_row(bucket);
            self.bucket_rows.insert(bucket, row);
        }
        self.bucket_rows.get_mut(&bucket).unwrap()
    }

    pub fn param(&self, p: ParamRef) -> f64 {
        match p {
            ParamRef::WordIn(r, c) => self.word_in[r * self.dim + c],
            ParamRef::WordOut(r, c) => self.word_out[r * self.dim + c],
            ParamRef::Bucket(b, c) => self.bucket_row(b)[c],
        }
    }

    pub fn param_mut(&mut self, p: ParamRef) -> &mut f64 {
        let d = self.dim;
        match p {
            ParamRef::WordIn(r, c) => &mut self.word_in[r * d + c],
            ParamRef::WordOut(r, c) => &mut self.word_out[r * d + c],
            ParamRef::Bucket(b, c) => &mut self.bucket_row_mut(b)[c],
        }
    }

    fn mean_of_buckets(&self, buckets: &[u32], out: &mut [f64]) {
        if buckets.is_empty() {
            return;
        }
        let scale = 1.0 / buckets.len() as f64;
        for &b in buckets {
            match self.bucket_rows.get(&b) {
                Some(row) => out.iter_mut().zip(row).for_each(|(o, v)| *o += scale * v),
                None => {
                    let row = self.initial_bucket_row(b);
                    out.iter_mut().zip(&row).for_each(|(o, v)| *o += scale * v);
                }
            }
        }
    }

    /// Representation of a vocabulary word: its own vector plus the mean of its n-gram vectors.
    fn word_repr(&self, idx: usize, out: &mut [f64]) {
        let row = &self.word_in[idx * self.dim..(idx + 1) * self.dim];
        out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        self.mean_of_buckets(&self.subwords[idx], out);
    }

    /// Defined for every string: vocabulary words add their own vector to
    /// the n-gram mean, unknown words use the n-gram mean alone, and strings
    /// without n-grams map to zero.
    pub fn embed_word(&self, word: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        match self.word_index(word) {
            Some(i) => self.word_repr(i, &mut out),
            None => self.mean_of_buckets(&self.ngram_buckets(word), &mut out),
        }
        out
    }

    fn context_vector(&self, context: &[usize]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim];
        for &c in context {
            self.word_repr(c, &mut h);
        }
        let scale = 1.0 / context.len().max(1) as f64;
        h.iter_mut().for_each(|v| *v *= scale);
        h
    }

    fn example_grad(&self, ex: &CbowExample) -> ExampleGrad {
        let d = self.dim;
        let h = self.context_vector(&ex.context);
        let mut grad_h = vec![0.0; d];
        let mut outputs = Vec::with_capacity(1 + ex.negatives.len());
        let mut loss = 0.0;
        let scored = std::iter::once((ex.target, 1.0)).chain(ex.negatives.iter().map(|&n| (n, 0.0)));
        for (row, label) in scored {
            let u = &self.word_out[row * d..(row + 1) * d];
            let s = dot(u, &h);
            loss -= if label > 0.5 { log_sigmoid(s) } else { log_sigmoid(-s) };
            // d/ds of the logistic loss.
            let g = crate::nn::sigmoid(s) - label;
            grad_h.iter_mut().zip(u).for_each(|(gh, ui)| *gh += g * ui);
            outputs.push((row, h.iter().map(|hi| g * hi).collect()));
        }
        ExampleGrad {
            loss,
            hidden: grad_h,
            outputs,
        }
    }

    /// Negative-sampling loss of one example.
    pub fn example_loss(&self, ex: &CbowExample) -> f64 {
        let h = self.context_vector(&ex.context);
        let d = self.dim;
        let mut loss = -log_sigmoid(dot(&self.word_out[ex.target * d..(ex.target + 1) * d], &h));
        for &n in &ex.negatives {
            loss -= log_sigmoid(-dot(&self.word_out[n * d..(n + 1) * d], &h));
        }
        loss
    }

    /// Full gradient of [`Self::example_loss`], summed per scalar parameter.
    pub fn example_gradient(&self, ex: &CbowExample) -> BTreeMap<ParamRef, f64> {
        let g = self.example_grad(ex);
        let mut out = BTreeMap::new();
        let c = ex.context.len().max(1) as f64;
        for &w in &ex.context {
            for k in 0..self.dim {
                *out.entry(ParamRef::WordIn(w, k)).or_insert(0.0) += g.hidden[k] / c;
            }
            let subs = &self.subwords[w];
            for &b in subs {
                for k in 0..self.dim {
                    *out.entry(ParamRef::Bucket(b, k)).or_insert(0.0) += g.hidden[k] / (c * subs.len() as f64);
                }
            }
        }
        for (row, du) in g.outputs {
            for (k, v) in du.into_iter().enumerate() {
                *out.entry(ParamRef::WordOut(row, k)).or_insert(0.0) += v;
            }
        }
        out
    }

    /// One SGD step on `ex`; returns the loss before the step.
    fn sgd_step(&mut self, ex: &CbowExample, lr: f64) -> f64 {
        let d = self.dim;
        let g = self.example_grad(ex);
        for (row, du) in &g.outputs {
            let u = &mut self.word_out[row * d..(row + 1) * d];
            u.iter_mut().zip(du).for_each(|(a, b)| *a -= lr * b);
        }
        let c = ex.context.len().max(1) as f64;
        for &w in &ex.context {
            let row = &mut self.word_in[w * d..(w + 1) * d];
            row.iter_mut().zip(&g.hidden).for_each(|(a, b)| *a -= lr * b / c);
            let subs = self.subwords[w].clone();
            let scale = lr / (c * subs.len().max(1) as f64);
            for b in subs {
                let row = self.bucket_row_mut(b);
                row.iter_mut().zip(&g.hidden).for_each(|(a, gh)| *a -= scale * gh);
            }
        }
        g.loss
    }
}

fn count_words(sentences: &[Vec<String>]) -> BTreeMap<&str, u64> {
    let mut counts = BTreeMap::new();
    for s in sentences {
        for w in s {
            *counts.entry(w.as_str()).or_insert(0) += 1;
        }
    }
    counts
}

fn negative_table(vocab: &[VocabEntry]) -> Vec<usize> {
    let weights: Vec<f64> = vocab.iter().map(|e| (e.count as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(NEGATIVE_TABLE_SIZE);
    for (i, w) in weights.iter().enumerate() {
        let n = (w / total * NEGATIVE_TABLE_SIZE as f64).ceil() as usize;
        table.extend(std::iter::repeat_n(i, n));
    }
    table
}

fn encode_stream(model: &SubwordModel, sentences: &[Vec<String>]) -> Vec<Vec<usize>> {
    sentences
        .iter()
        .map(|s| s.iter().filter_map(|w| model.word_index(w)).collect())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect()
}

fn sample_negatives(table: &[usize], target: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let distinct = table.first() != table.last();
    while out.len() < k {
        let n = table[(rng.next_u64() % table.len() as u64) as usize];
        if n != target || !distinct {
            out.push(n);
        }
    }
    out
}

/// Examples of one sentence with a seeded, randomly shrunk window.
fn sentence_examples(
    sentence: &[usize],
    window: usize,
    negatives: usize,
    table: &[usize],
    shrink: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<CbowExample> {
    let mut out = Vec::new();
    for t in 0..sentence.len() {
        let w = if shrink { 1 + (rng.next_u64() % window as u64) as usize } else { window };
        let lo = t.saturating_sub(w);
        let hi = (t + w + 1).min(sentence.len());
        let context: Vec<usize> = (lo..hi).filter(|&i| i != t).map(|i| sentence[i]).collect();
        if context.is_empty() {
            continue;
        }
        let target = sentence[t];
        out.push(CbowExample {
            context,
            target,
            negatives: sample_negatives(table, target, negatives, rng),
        });
    }
    out
}

fn run_epochs(
    model: &mut SubwordModel,
    data: &[Vec<usize>],
    config: &CbowConfig,
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> CbowStats {
    let table = negative_table(&model.vocab);
    let total: usize = data.iter().map(Vec::len).sum::<usize>() * epochs;
    let mut processed = 0usize;
    let mut stats = CbowStats::default();
    for _ in 0..epochs {
        let mut loss = 0.0;
        let mut n = 0usize;
        for sentence in data {
            let lr = config.lr * (1.0 - processed as f64 / total.max(1) as f64);
            for ex in sentence_examples(sentence, config.window, config.negatives, &table, true, rng) {
                loss += model.sgd_step(&ex, lr.max(0.0));
                n += 1;
            }
            processed += sentence.len();
        }
        stats.epochs_run += 1;
        stats.epoch_loss.push(if n > 0 { loss / n as f64 } else { 0.0 });
    }
    stats
}

/// Trains a model on tokenized sentences.
pub fn train_cbow(sentences: &[Vec<String>], config: &CbowConfig) -> Result<(SubwordModel, CbowStats)> {
    config.validate()?;
    let counts = count_words(sentences);
    if counts.is_empty() {
        return Err(Error::Config("empty training corpus".into()));
    }
    let mut vocab: Vec<VocabEntry> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count)
        .map(|(w, c)| VocabEntry {
            word: w.to_owned(),
            count: c,
        })
        .collect();
    if vocab.is_empty() {
        return Err(Error::Config(format!("no word occurs at least {} times", config.min_count)));
    }
    vocab.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.dim;
    let bound = 1.0 / d as f64;
    let word_in = (0..vocab.len() * d).map(|_| rng.random_range(-bound..bound)).collect();
    let word_out = vec![0.0; vocab.len() * d];
    let mut model = SubwordModel::from_parts(
        (d, config.min_n, config.max_n, config.buckets, config.seed),
        vocab,
        word_in,
        word_out,
        BTreeMap::new(),
    )?;
    let data = encode_stream(&model, sentences);
    let stats = run_epochs(&mut model, &data, config, config.epochs, &mut rng);
    Ok((model, stats))
}

/// Adds words of `sentences` that reach `config.min_count` to the
/// vocabulary, with fresh input rows and zero output rows.
pub fn extend_vocabulary(model: &SubwordModel, sentences: &[Vec<String>], config: &CbowConfig) -> SubwordModel {
    let mut m = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED);
    let d = m.dim;
    let bound = 1.0 / d as f64;
    let mut added: Vec<VocabEntry> = Vec::new();
    for (w, c) in count_words(sentences) {
        match m.word_index(w) {
            Some(i) => m.vocab[i].count += c,
            None if c >= config.min_count => added.push(VocabEntry {
                word: w.to_owned(),
                count: c,
            }),
            None => {}
        }
    }
    added.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    for e in added {
        m.word_in.extend((0..d).map(|_| rng.random_range(-bound..bound)));
        m.word_out.extend(std::iter::repeat_n(0.0, d));
        m.vocab.push(e);
    }
    m.reindex();
    m
}

/// Continues training on a new corpus after [`extend_vocabulary`].
/// Zero epochs return the model unchanged.
pub fn fine_tune(
    model: &SubwordModel,
    sentences: &[Vec<String>],
    config: &CbowConfig,
    epochs: usize,
) -> Result<(SubwordModel, CbowStats)> {
    if config.dim != model.dim {
        return Err(Error::Config(format!(
            "dimension mismatch: model has {}, configuration asks for {}",
            model.dim, config.dim
        )));
    }
    config.validate()?;
    if epochs == 0 {
        return Ok((model.clone(), CbowStats::default()));
    }
    let mut m = extend_vocabulary(model, sentences, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let data = encode_stream(&m, sentences);
    let stats = run_epochs(&mut m, &data, config, epochs, &mut rng);
    Ok((m, stats))
}

/// Mean negative-sampling loss over a corpus with full windows and
/// negatives drawn from `seed`; comparable across models that share a vocabulary.
pub fn average_loss(model: &SubwordModel, sentences: &[Vec<String>], config: &CbowConfig, seed: u64) -> f64 {
    let table = negative_table(&model.vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut loss = 0.0;
    let mut n = 0usize;
    for sentence in encode_stream(model, sentences) {
        for ex in sentence_examples(&sentence, config.window, config.negatives, &table, false, &mut rng) {
            loss += model.example_loss(&ex);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        loss / n as f64
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> CbowConfig {
        CbowConfig {
            dim: 16,
            buckets: 5_000,
            min_count: 1,
            seed: 3,
            ..CbowConfig::default()
        }
    }

    fn corpus() -> Vec<Vec<String>> {
        let lines = [
            "Prograf 5 mg morgens",
            "Sandimmun 5 mg abends",
            "Im Sono kein Stau",
            "Kreatinin im Verlauf stabil",
        ];
        (0..20)
            .flat_map(|_| lines.iter())
            .map(|l| l.split(' ').map(str::to_owned).collect())
            .collect()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0x811c9dc5);
        assert_eq!(fnv1a(b"a"), 0xe40c292c);
        assert_eq!(fnv1a(b"foobar"), 0xbf9cf968);
    }

    #[test]
    fn ngrams_wrap_word() {
        let g = char_ngrams("ab", 3, 6);
        assert_eq!(g, ["<ab", "ab>", "<ab>"]);
        assert!(char_ngrams("", 3, 6).is_empty());
    }

    #[test]
    fn runs_exactly_the_configured_epochs() {
        let (_, stats) = train_cbow(&corpus(), &small_config()).unwrap();
        assert_eq!(stats.epochs_run, 5);
        assert_eq!(stats.epoch_loss.len(), 5);
    }

    #[test]
    fn degenerate_configs() {
        let c = corpus();
        let zero_neg = CbowConfig { negatives: 0, ..small_config() };
        assert!(train_cbow(&c, &zero_neg).is_err());
        let zero_dim = CbowConfig { dim: 0, ..small_config() };
        assert!(train_cbow(&c, &zero_dim).is_err());
        assert!(train_cbow(&[], &small_config()).is_err());
    }

    #[test]
    fn oov_and_empty() {
        let (m, _) = train_cbow(&corpus(), &small_config()).unwrap();
        assert!(m.embed_word("Prograf").iter().all(|v| v.is_finite()));
        assert!(m.embed_word("").iter().all(|&v| v == 0.0));
        let oov = m.embed_word("Sonographie");
        assert!(oov.iter().any(|&v| v != 0.0));
        let shared: Vec<u32> = m.ngram_buckets("Sonographie");
        assert!(m.ngram_buckets("Sono").iter().any(|b| shared.contains(b)));
    }

    #[test]
    fn deterministic() {
        let (a, _) = train_cbow(&corpus(), &small_config()).unwrap();
        let (b, _) = train_cbow(&corpus(), &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fine_tune_behaviour() {
        let cfg = small_config();
        let (m, _) = train_cbow(&corpus(), &cfg).unwrap();
        let (same, _) = fine_tune(&m, &corpus(), &cfg, 0).unwrap();
        assert_eq!(same, m);

        let domain: Vec<Vec<String>> = (0..30)
            .map(|_| "Tacrolimus 2 mg morgens".split(' ').map(str::to_owned).collect())
            .collect();
        let (tuned, _) = fine_tune(&m, &domain, &cfg, 2).unwrap();
        for e in m.vocab() {
            assert!(tuned.word_index(&e.word).is_some());
        }
        assert!(tuned.word_index("Tacrolimus").is_some());
        let before = average_loss(&extend_vocabulary(&m, &domain, &cfg), &domain, &cfg, 9);
        let after = average_loss(&tuned, &domain, &cfg, 9);
        assert!(after <= before, "{after} > {before}");

        let wrong_dim = CbowConfig { dim: 8, ..cfg };
        assert!(fine_tune(&m, &domain, &wrong_dim, 1).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (mut m, _) = train_cbow(&corpus(), &small_config()).unwrap();
        let ex = CbowExample {
            context: vec![0, 2, 3, 2],
            target: 1,
            negatives: vec![4, 5, 1],
        };
        let grad = m.example_gradient(&ex);
        let eps = 1e-4;
        for (&p, &g) in grad.iter().step_by(7) {
            let orig = m.param(p);
            *m.param_mut(p) = orig + eps;
            let up = m.example_loss(&ex);
            *m.param_mut(p) = orig - eps;
            let down = m.example_loss(&ex);
            *m.param_mut(p) = orig;
            let num = (up - down) / (2.0 * eps);
            let rel = (num - g).abs() / (num.abs() + g.abs()).max(1e-8);
            assert!(rel < 1e-3, "{p:?}: {g} vs {num}");
        }
    }
}
