use std::collections::BTreeMap;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingMode {
    #[default]
    Mean,
    Min,
    Max,
}

impl PoolingMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(PoolingMode::Mean),
            "min" => Some(PoolingMode::Min),
            "max" => Some(PoolingMode::Max),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub count: u64,
    pub sum: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl PoolEntry {
    fn new(v: &[f64]) -> Self {
        PoolEntry {
            count: 1,
            sum: v.to_vec(),
            min: v.to_vec(),
            max: v.to_vec(),
        }
    }

    fn add(&mut self, v: &[f64]) {
        self.count += 1;
        for (k, &x) in v.iter().enumerate() {
            self.sum[k] += x;
            self.min[k] = self.min[k].min(x);
            self.max[k] = self.max[k].max(x);
        }
    }

    pub fn aggregate(&self, mode: PoolingMode) -> Vec<f64> {
        match mode {
            PoolingMode::Mean => self.sum.iter().map(|s| s / self.count as f64).collect(),
            PoolingMode::Min => self.min.clone(),
            PoolingMode::Max => self.max.clone(),
        }
    }
}

/// Running statistics of every contextual vector seen per word.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PooledMemory {
    pub mode: PoolingMode,
    pub entries: BTreeMap<String, PoolEntry>,
}

impl PooledMemory {
    pub fn new(mode: PoolingMode) -> Self {
        PooledMemory {
            mode,
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn get(&self, word: &str) -> Option<Vec<f64>> {
        self.entries.get(word).map(|e| e.aggregate(self.mode))
    }

    /// Records `v` for `word` and returns the aggregate including it.
    pub fn observe(&mut self, word: &str, v: &[f64]) -> Vec<f64> {
        match self.entries.get_mut(word) {
            Some(e) => e.add(v),
            None => {
                self.entries.insert(word.to_owned(), PoolEntry::new(v));
            }
        }
        self.entries[word].aggregate(self.mode)
    }
}

/// Concatenates each contextual vector with the word's pooled aggregate,
/// updating `memory` along the way.
pub fn pooled_embed(memory: &mut PooledMemory, contextual: ArrayView2<f64>, tokens: &[&str]) -> Result<Array2<f64>> {
    if contextual.nrows() != tokens.len() {
        return Err(Error::LengthMismatch(contextual.nrows(), tokens.len()));
    }
    let d = contextual.ncols();
    if let Some(e) = memory.entries.values().next() {
        if e.sum.len() != d {
            return Err(Error::LengthMismatch(e.sum.len(), d));
        }
    }
    let mut out = Array2::zeros((tokens.len(), 2 * d));
    for (i, tok) in tokens.iter().enumerate() {
        let cur = contextual.row(i).to_vec();
        let agg = memory.observe(tok, &cur);
        out.slice_mut(s![i, ..d]).assign(&contextual.row(i));
        out.slice_mut(s![i, d..]).assign(&ndarray::aview1(&agg));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_occurrence_mean_is_current() {
        let mut m = PooledMemory::new(PoolingMode::Mean);
        let v = array![[1.0, -2.0]];
        let out = pooled_embed(&mut m, v.view(), &["Stau"]).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![1.0, -2.0, 1.0, -2.0]);
        let out = pooled_embed(&mut m, v.view(), &["Stau"]).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![1.0, -2.0, 1.0, -2.0]);
    }

    #[test]
    fn min_and_max() {
        let mut m = PooledMemory::new(PoolingMode::Min);
        let v = array![[1.0, 5.0], [3.0, 2.0]];
        let out = pooled_embed(&mut m, v.view(), &["x", "x"]).unwrap();
        assert_eq!(out.row(1).slice(s![2..]).to_vec(), vec![1.0, 2.0]);
        m.mode = PoolingMode::Max;
        assert_eq!(m.get("x").unwrap(), vec![3.0, 5.0]);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn mean_matches_arithmetic_mean() {
        let mut m = PooledMemory::new(PoolingMode::Mean);
        let vs: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        for v in &vs {
            m.observe("w", v);
        }
        let got = m.get("w").unwrap();
        for k in 0..2 {
            let want = vs.iter().map(|v| v[k]).sum::<f64>() / 50.0;
            assert!((got[k] - want).abs() < 1e-6);
        }
    }
}
