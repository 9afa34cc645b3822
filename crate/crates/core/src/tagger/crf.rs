//! Linear-chain CRF over `L` labels. The transition matrix is
//! `(L + 2) × (L + 2)` with row/column `L` as the virtual start state and
//! `L + 1` as the virtual stop state; `trans[[i, j]]` scores `i → j`.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::nn::log_sum_exp;

/// Score given to transitions the tagging scheme forbids.
pub const FORBIDDEN: f64 = -10_000.0;

pub fn start_state(labels: usize) -> usize {
    labels
}

pub fn stop_state(labels: usize) -> usize {
    labels + 1
}

fn check(emissions: ArrayView2<f64>, trans: ArrayView2<f64>) -> Result<usize> {
    let l = emissions.ncols();
    if trans.dim() != (l + 2, l + 2) {
        return Err(Error::LengthMismatch(trans.nrows(), l + 2));
    }
    if emissions.iter().chain(trans.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("CRF scores"));
    }
    Ok(l)
}

/// Score of one label path, including start and stop transitions.
pub fn path_score(emissions: ArrayView2<f64>, trans: ArrayView2<f64>, path: &[usize]) -> f64 {
    let l = emissions.ncols();
    if path.is_empty() {
        return trans[[start_state(l), stop_state(l)]];
    }
    let mut s = trans[[start_state(l), path[0]]] + trans[[path[path.len() - 1], stop_state(l)]];
    for (t, &y) in path.iter().enumerate() {
        s += emissions[[t, y]];
        if t > 0 {
            s += trans[[path[t - 1], y]];
        }
    }
    s
}

/// Best path and its score. Ties go to the lower label index.
pub fn viterbi_decode(emissions: ArrayView2<f64>, trans: ArrayView2<f64>) -> Result<(Vec<usize>, f64)> {
    let l = check(emissions, trans)?;
    let steps = emissions.nrows();
    if steps == 0 || l == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let start = start_state(l);
    let mut delta: Vec<f64> = (0..l).map(|j| trans[[start, j]] + emissions[[0, j]]).collect();
    let mut back = vec![vec![0usize; l]; steps];
    for t in 1..steps {
        let mut next = vec![0.0; l];
        for j in 0..l {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, &d) in delta.iter().enumerate() {
                let v = d + trans[[i, j]];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + emissions[[t, j]];
            back[t][j] = arg;
        }
        delta = next;
    }
    let stop = stop_state(l);
    let mut best = f64::NEG_INFINITY;
    let mut last = 0;
    for (j, &d) in delta.iter().enumerate() {
        let v = d + trans[[j, stop]];
        if v > best {
            best = v;
            last = j;
        }
    }
    let mut path = vec![last; steps];
    for t in (1..steps).rev() {
        path[t - 1] = back[t][path[t]];
    }
    Ok((path, best))
}

fn forward_table(emissions: ArrayView2<f64>, trans: ArrayView2<f64>) -> Array2<f64> {
    let (steps, l) = emissions.dim();
    let start = start_state(l);
    let mut alpha = Array2::zeros((steps, l));
    for j in 0..l {
        alpha[[0, j]] = trans[[start, j]] + emissions[[0, j]];
    }
    for t in 1..steps {
        for j in 0..l {
            alpha[[t, j]] = log_sum_exp((0..l).map(|i| alpha[[t - 1, i]] + trans[[i, j]])) + emissions[[t, j]];
        }
    }
    alpha
}

fn backward_table(emissions: ArrayView2<f64>, trans: ArrayView2<f64>) -> Array2<f64> {
    let (steps, l) = emissions.dim();
    let stop = stop_state(l);
    let mut beta = Array2::zeros((steps, l));
    for i in 0..l {
        beta[[steps - 1, i]] = trans[[i, stop]];
    }
    for t in (0..steps - 1).rev() {
        for i in 0..l {
            beta[[t, i]] = log_sum_exp((0..l).map(|j| trans[[i, j]] + emissions[[t + 1, j]] + beta[[t + 1, j]]));
        }
    }
    beta
}

/// Forward-backward quantities in rescaled probability space: `alpha` and
/// `beta` rows are normalized per step so that `alpha * beta` are the
/// marginals and `log_z` is exact.
struct Scaled {
    alpha: Array2<f64>,
    beta: Array2<f64>,
    /// Normalizer of each step's alpha recursion.
    norm: Vec<f64>,
    /// `exp(trans - shift)` over the label block.
    exp_trans: Array2<f64>,
    /// `exp(emissions - row max)`.
    exp_emit: Array2<f64>,
    log_z: f64,
}

fn scaled(emissions: ArrayView2<f64>, trans: ArrayView2<f64>) -> Option<Scaled> {
    let (steps, l) = emissions.dim();
    let (start, stop) = (start_state(l), stop_state(l));
    let block = trans.slice(ndarray::s![..l, ..l]);
    let shift = block.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp_trans = block.mapv(|v| (v - shift).exp());
    let row_max: Vec<f64> = emissions
        .rows()
        .into_iter()
        .map(|r| r.fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
        .collect();
    let mut exp_emit = emissions.to_owned();
    for (t, mut r) in exp_emit.rows_mut().into_iter().enumerate() {
        r.mapv_inplace(|v| (v - row_max[t]).exp());
    }
    let start_max = (0..l).map(|j| trans[[start, j]]).fold(f64::NEG_INFINITY, f64::max);
    let stop_max = (0..l).map(|j| trans[[j, stop]]).fold(f64::NEG_INFINITY, f64::max);

    let mut alpha = Array2::zeros((steps, l));
    let mut norm = vec![0.0; steps];
    let mut log_z = 0.0;
    for t in 0..steps {
        for j in 0..l {
            let incoming = if t == 0 {
                (trans[[start, j]] - start_max).exp()
            } else {
                (0..l).map(|i| alpha[[t - 1, i]] * exp_trans[[i, j]]).sum()
            };
            alpha[[t, j]] = incoming * exp_emit[[t, j]];
        }
        let c: f64 = alpha.row(t).sum();
        if !(c > 0.0 && c.is_finite()) {
            return None;
        }
        alpha.row_mut(t).mapv_inplace(|v| v / c);
        norm[t] = c;
        log_z += c.ln() + row_max[t] + if t == 0 { start_max } else { shift };
    }
    let exp_stop: Vec<f64> = (0..l).map(|j| (trans[[j, stop]] - stop_max).exp()).collect();
    let last: f64 = (0..l).map(|j| alpha[[steps - 1, j]] * exp_stop[j]).sum();
    if !(last > 0.0 && last.is_finite()) {
        return None;
    }
    log_z += last.ln() + stop_max;

    let mut beta = Array2::zeros((steps, l));
    for i in 0..l {
        beta[[steps - 1, i]] = exp_stop[i] / last;
    }
    for t in (0..steps - 1).rev() {
        for i in 0..l {
            beta[[t, i]] = (0..l)
                .map(|j| exp_trans[[i, j]] * exp_emit[[t + 1, j]] * beta[[t + 1, j]])
                .sum::<f64>()
                / norm[t + 1];
        }
    }
    Some(Scaled {
        alpha,
        beta,
        norm,
        exp_trans,
        exp_emit,
        log_z,
    })
}

fn log_partition_logspace(emissions: ArrayView2<f64>, trans: ArrayView2<f64>) -> f64 {
    let l = emissions.ncols();
    let alpha = forward_table(emissions, trans);
    let last = alpha.nrows() - 1;
    log_sum_exp((0..l).map(|j| alpha[[last, j]] + trans[[j, stop_state(l)]]))
}

/// Log partition function via the forward algorithm.
pub fn log_partition(emissions: ArrayView2<f64>, trans: ArrayView2<f64>) -> Result<f64> {
    let l = check(emissions, trans)?;
    if emissions.nrows() == 0 {
        return Ok(trans[[start_state(l), stop_state(l)]]);
    }
    Ok(match scaled(emissions, trans) {
        Some(s) => s.log_z,
        None => log_partition_logspace(emissions, trans),
    })
}

/// Per-position label marginals (`T × L`); rows sum to one.
pub fn marginals(emissions: ArrayView2<f64>, trans: ArrayView2<f64>) -> Result<Array2<f64>> {
    let l = check(emissions, trans)?;
    let steps = emissions.nrows();
    if steps == 0 {
        return Ok(Array2::zeros((0, l)));
    }
    if let Some(s) = scaled(emissions, trans) {
        return Ok(s.alpha * s.beta);
    }
    let alpha = forward_table(emissions, trans);
    let beta = backward_table(emissions, trans);
    let log_z = log_partition_logspace(emissions, trans);
    Ok((alpha + beta).mapv(|v| (v - log_z).exp()))
}

#[derive(Clone, Debug)]
pub struct CrfLoss {
    pub loss: f64,
    pub d_emissions: Array2<f64>,
    pub d_transitions: Array2<f64>,
}

/// `logZ - score(gold)` with gradients for emissions and transitions.
pub fn crf_neg_log_likelihood(emissions: ArrayView2<f64>, trans: ArrayView2<f64>, gold: &[usize]) -> Result<CrfLoss> {
    let l = check(emissions, trans)?;
    let steps = emissions.nrows();
    if gold.len() != steps {
        return Err(Error::LengthMismatch(gold.len(), steps));
    }
    if let Some(&bad) = gold.iter().find(|&&y| y >= l) {
        return Err(Error::Labels(format!("label index {bad} out of range for {l} labels")));
    }
    let mut d_transitions = Array2::zeros((l + 2, l + 2));
    if steps == 0 {
        return Ok(CrfLoss {
            loss: 0.0,
            d_emissions: Array2::zeros((0, l)),
            d_transitions,
        });
    }
    let (start, stop) = (start_state(l), stop_state(l));
    let (log_z, mut d_emissions) = match scaled(emissions, trans) {
        Some(s) => {
            for t in 1..steps {
                for i in 0..l {
                    let a = s.alpha[[t - 1, i]] / s.norm[t];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..l {
                        d_transitions[[i, j]] += a * s.exp_trans[[i, j]] * s.exp_emit[[t, j]] * s.beta[[t, j]];
                    }
                }
            }
            (s.log_z, s.alpha * s.beta)
        }
        None => {
            let alpha = forward_table(emissions, trans);
            let beta = backward_table(emissions, trans);
            let log_z = log_sum_exp((0..l).map(|j| alpha[[steps - 1, j]] + trans[[j, stop]]));
            for t in 1..steps {
                for i in 0..l {
                    for j in 0..l {
                        d_transitions[[i, j]] +=
                            (alpha[[t - 1, i]] + trans[[i, j]] + emissions[[t, j]] + beta[[t, j]] - log_z).exp();
                    }
                }
            }
            (log_z, (alpha + beta).mapv(|v| (v - log_z).exp()))
        }
    };
    let loss = log_z - path_score(emissions, trans, gold);
    if !loss.is_finite() {
        return Err(Error::NonFinite("CRF loss"));
    }
    for j in 0..l {
        d_transitions[[start, j]] += d_emissions[[0, j]];
        d_transitions[[j, stop]] += d_emissions[[steps - 1, j]];
    }
    d_transitions[[start, gold[0]]] -= 1.0;
    d_transitions[[gold[steps - 1], stop]] -= 1.0;
    for t in 0..steps {
        d_emissions[[t, gold[t]]] -= 1.0;
        if t > 0 {
            d_transitions[[gold[t - 1], gold[t]]] -= 1.0;
        }
    }
    Ok(CrfLoss {
        loss,
        d_emissions,
        d_transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::uniform_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_paths(steps: usize, l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..steps {
            out = out
                .into_iter()
                .flat_map(|p| (0..l).map(move |y| [p.clone(), vec![y]].concat()))
                .collect();
        }
        out
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = uniform_matrix(5, 4, 2.0, &mut rng);
        let tr = uniform_matrix(6, 6, 2.0, &mut rng);
        let paths = all_paths(5, 4);
        assert_eq!(paths.len(), 1024);
        let scores: Vec<f64> = paths.iter().map(|p| path_score(e.view(), tr.view(), p)).collect();
        let z = log_partition(e.view(), tr.view()).unwrap();
        assert!((z - log_sum_exp(scores.iter().copied())).abs() < 1e-9);
        let (best, s) = viterbi_decode(e.view(), tr.view()).unwrap();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((s - max).abs() < 1e-9);
        assert!((path_score(e.view(), tr.view(), &best) - s).abs() < 1e-9);
        let m = marginals(e.view(), tr.view()).unwrap();
        for row in m.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_label_has_zero_loss() {
        let e = Array2::from_elem((3, 1), 0.7);
        let tr = Array2::from_elem((3, 3), 0.2);
        let l = crf_neg_log_likelihood(e.view(), tr.view(), &[0, 0, 0]).unwrap();
        assert!(l.loss.abs() < 1e-12);
    }

    #[test]
    fn uniform_scores_tie_to_index_zero() {
        let e = Array2::zeros((4, 3));
        let tr = Array2::zeros((5, 5));
        assert_eq!(viterbi_decode(e.view(), tr.view()).unwrap().0, vec![0; 4]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = uniform_matrix(4, 3, 1.5, &mut rng);
        let tr = uniform_matrix(5, 5, 1.5, &mut rng);
        let gold = [2, 0, 1, 1];
        let g = crf_neg_log_likelihood(e.view(), tr.view(), &gold).unwrap();
        let f = |e: &Array2<f64>, tr: &Array2<f64>| crf_neg_log_likelihood(e.view(), tr.view(), &gold).unwrap().loss;
        let eps = 1e-5;
        for idx in [(0, 0), (1, 2), (3, 1)] {
            let (mut up, mut down) = (e.clone(), e.clone());
            up[idx] += eps;
            down[idx] -= eps;
            let num = (f(&up, &tr) - f(&down, &tr)) / (2.0 * eps);
            assert!((num - g.d_emissions[idx]).abs() < 1e-7);
        }
        for idx in [(3, 0), (2, 4), (1, 1)] {
            let (mut up, mut down) = (tr.clone(), tr.clone());
            up[idx] += eps;
            down[idx] -= eps;
            let num = (f(&e, &up) - f(&e, &down)) / (2.0 * eps);
            assert!((num - g.d_transitions[idx]).abs() < 1e-7);
        }
    }

    #[test]
    fn extreme_scores_fall_back_to_log_space() {
        let mut e = Array2::zeros((3, 2));
        e[[1, 1]] = 2000.0;
        let mut tr = Array2::zeros((4, 4));
        tr[[0, 1]] = FORBIDDEN;
        tr[[1, 1]] = FORBIDDEN;
        let z = log_partition(e.view(), tr.view()).unwrap();
        let scores: Vec<f64> = all_paths(3, 2).iter().map(|p| path_score(e.view(), tr.view(), p)).collect();
        assert!((z - log_sum_exp(scores)).abs() < 1e-9);
        let g = crf_neg_log_likelihood(e.view(), tr.view(), &[1, 0, 0]).unwrap();
        assert!(g.d_emissions.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_non_finite() {
        let mut e = Array2::zeros((2, 2));
        e[[0, 0]] = f64::NAN;
        assert!(viterbi_decode(e.view(), Array2::zeros((4, 4)).view()).is_err());
    }
}
