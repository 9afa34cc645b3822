use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;

use super::{slice1, slice1_mut, slice2, slice2_mut, uniform_matrix, Params};

/// `y = W x + b`, applied row-wise to a `T × in` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn new(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Linear {
            w: uniform_matrix(output, input, bound, rng),
            b: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.w.t());
        y += &self.b;
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>, grad: &mut Linear) -> Array2<f64> {
        general_mat_mul(1.0, &dy.t(), &x, 1.0, &mut grad.w);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w)
    }
}

impl Params for Linear {
    fn params(&self) -> Vec<&[f64]> {
        vec![slice2(&self.w), slice1(&self.b)]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice2_mut(&mut self.w), slice1_mut(&mut self.b)]
    }
}
