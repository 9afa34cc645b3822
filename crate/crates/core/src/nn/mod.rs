//! Minimal dense building blocks with hand-written gradients.
//!
//! Every trainable struct implements [`Params`]; the same type doubles as
//! its own gradient accumulator, so optimizers and finite-difference checks
//! work on any model by zipping parameter slices.

mod linear;
mod lstm;
mod optim;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use linear::Linear;
pub use lstm::{Lstm, LstmTrace};
pub use optim::{Adam, Sgd};

pub trait Params {
    /// Parameter blocks in a fixed order.
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero(&mut self) {
        for p in self.params_mut() {
            p.fill(0.0);
        }
    }

    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        for (p, o) in self.params_mut().into_iter().zip(other.params()) {
            for (a, b) in p.iter_mut().zip(o) {
                *a += scale * b;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for p in self.params_mut() {
            for a in p.iter_mut() {
                *a *= factor;
            }
        }
    }

    fn norm(&self) -> f64 {
        self.params()
            .iter()
            .flat_map(|p| p.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Scales down so the global L2 norm is at most `max`. Returns the norm before clipping.
    fn clip_norm(&mut self, max: f64) -> f64 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self.scale(max / n);
        }
        n
    }
}

/// A zeroed copy, used as gradient buffer.
pub fn zeros_like<P: Params + Clone>(p: &P) -> P {
    let mut g = p.clone();
    g.zero();
    g
}

pub(crate) fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

pub(crate) fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("contiguous")
}

pub(crate) fn slice2(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

pub(crate) fn slice2_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("contiguous")
}

pub fn uniform_matrix(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Inverted dropout mask: entries are 0 or `1/(1-p)`.
pub fn dropout_mask(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// Central-difference gradient check on the parameters listed in `coords`
/// (block, offset). Returns the largest relative error
/// `|analytic - numeric| / max(|analytic| + |numeric|, floor)`.
pub fn max_relative_error<P: Params>(
    model: &mut P,
    analytic: &P,
    coords: &[(usize, usize)],
    eps: f64,
    floor: f64,
    mut loss: impl FnMut(&P) -> f64,
) -> f64 {
    let mut worst = 0.0f64;
    for &(block, offset) in coords {
        let original = model.params_mut()[block][offset];
        model.params_mut()[block][offset] = original + eps;
        let up = loss(model);
        model.params_mut()[block][offset] = original - eps;
        let down = loss(model);
        model.params_mut()[block][offset] = original;
        let numeric = (up - down) / (2.0 * eps);
        let exact = analytic.params()[block][offset];
        let err = (exact - numeric).abs() / (exact.abs() + numeric.abs()).max(floor);
        worst = worst.max(err);
    }
    worst
}

/// `per_block` random coordinates from every parameter block.
pub fn sample_coords<P: Params>(model: &P, per_block: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<(usize, usize)>> {
    model
        .params()
        .iter()
        .enumerate()
        .map(|(b, p)| {
            if p.is_empty() {
                return Vec::new();
            }
            (0..per_block).map(|_| (b, rng.random_range(0..p.len()))).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_is_stable() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, -3.0, 700.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
