use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.75, 0.10, 0.15);
pub const MIN_DOCUMENTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub ratios: (f64, f64, f64),
    pub folds: Vec<Fold>,
}

/// Fisher-Yates driven by ChaCha8, so the permutation is fixed across
/// platforms and `rand` releases.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// `k` independent train/dev/test splits; fold `i` shuffles with seed `seed + i`.
pub fn make_folds(doc_ids: &[String], k: usize, ratios: (f64, f64, f64), seed: u64) -> Result<FoldPlan> {
    let (rt, rd, rs) = ratios;
    if [rt, rd, rs].iter().any(|r| !(0.0..=1.0).contains(r)) || (rt + rd + rs - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {rt}/{rd}/{rs} must be non-negative and sum to 1"
        )));
    }
    if k == 0 {
        return Err(Error::Config("at least one fold is required".into()));
    }
    let mut ids: Vec<String> = doc_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() < MIN_DOCUMENTS {
        return Err(Error::Config(format!(
            "{} documents given; at least {MIN_DOCUMENTS} are needed",
            ids.len()
        )));
    }
    let n = ids.len();
    let n_train = ((rt * n as f64).round() as usize).min(n);
    let n_dev = ((rd * n as f64).round() as usize).min(n - n_train);

    let folds = (0..k)
        .map(|i| {
            let mut order = ids.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            shuffle(&mut order, &mut rng);
            let test = order.split_off(n_train + n_dev);
            let dev = order.split_off(n_train);
            Fold {
                train: order,
                dev,
                test,
            }
        })
        .collect();
    Ok(FoldPlan { seed, ratios, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("doc{i:03}")).collect()
    }

    #[test]
    fn hundred_documents() {
        let plan = make_folds(&ids(100), 5, DEFAULT_RATIOS, 7).unwrap();
        assert_eq!(plan.folds.len(), 5);
        for f in &plan.folds {
            assert_eq!((f.train.len(), f.dev.len(), f.test.len()), (75, 10, 15));
            let all: HashSet<&String> = f.train.iter().chain(&f.dev).chain(&f.test).collect();
            assert_eq!(all.len(), 100);
        }
        assert_ne!(plan.folds[0].test, plan.folds[1].test);
    }

    #[test]
    fn everything_in_train() {
        let plan = make_folds(&ids(12), 1, (1.0, 0.0, 0.0), 0).unwrap();
        assert_eq!(plan.folds[0].train.len(), 12);
        assert!(plan.folds[0].dev.is_empty() && plan.folds[0].test.is_empty());
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = make_folds(&ids(40), 5, DEFAULT_RATIOS, 3).unwrap();
        let mut rev = ids(40);
        rev.reverse();
        let b = make_folds(&rev, 5, DEFAULT_RATIOS, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_input() {
        assert!(make_folds(&ids(100), 5, (0.7, 0.1, 0.1), 0).is_err());
        assert!(make_folds(&ids(9), 5, DEFAULT_RATIOS, 0).is_err());
    }
}
