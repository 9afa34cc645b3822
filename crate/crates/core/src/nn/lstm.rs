use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, slice1, slice1_mut, slice2, slice2_mut, uniform_matrix, Params};

/// Single-layer LSTM. Gate blocks are ordered input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
}

/// Activations kept from the forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    /// Hidden states, `T × h`.
    pub hidden: Array2<f64>,
    cells: Array2<f64>,
    /// Post-activation gates, `T × 4h`.
    gates: Array2<f64>,
}

impl Lstm {
    pub fn new(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden.max(1) as f64).sqrt();
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Lstm {
            wx: uniform_matrix(4 * hidden, input, bound, rng),
            wh: uniform_matrix(4 * hidden, hidden, bound, rng),
            b,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.wh.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.wx.ncols()
    }

    /// Runs over the rows of `x` (time-major) from a zero state.
    pub fn forward(&self, x: ArrayView2<f64>) -> LstmTrace {
        let h = self.hidden_size();
        let steps = x.nrows();
        let mut pre = x.dot(&self.wx.t());
        pre += &self.b;
        let mut hidden = Array2::zeros((steps, h));
        let mut cells = Array2::zeros((steps, h));
        let mut gates = Array2::zeros((steps, 4 * h));
        let mut h_prev = Array1::<f64>::zeros(h);
        let mut c_prev = Array1::<f64>::zeros(h);
        for t in 0..steps {
            let mut z = pre.row(t).to_owned();
            if t > 0 {
                z += &self.wh.dot(&h_prev);
            }
            let mut g_row = gates.row_mut(t);
            for k in 0..h {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[h + k]);
                let g = z[2 * h + k].tanh();
                let o = sigmoid(z[3 * h + k]);
                let c = f * c_prev[k] + i * g;
                g_row[k] = i;
                g_row[h + k] = f;
                g_row[2 * h + k] = g;
                g_row[3 * h + k] = o;
                cells[[t, k]] = c;
                hidden[[t, k]] = o * c.tanh();
            }
            h_prev.assign(&hidden.row(t));
            c_prev.assign(&cells.row(t));
        }
        LstmTrace {
            hidden,
            cells,
            gates,
        }
    }

    /// Backpropagates `dh` (`T × h`, gradient w.r.t. every hidden state),
    /// accumulating into `grad` and returning `dL/dx`.
    pub fn backward(&self, x: ArrayView2<f64>, trace: &LstmTrace, dh: ArrayView2<f64>, grad: &mut Lstm) -> Array2<f64> {
        let h = self.hidden_size();
        let steps = x.nrows();
        let mut dz = Array2::<f64>::zeros((steps, 4 * h));
        let mut dh_next = Array1::<f64>::zeros(h);
        let mut dc_next = Array1::<f64>::zeros(h);
        for t in (0..steps).rev() {
            let gates = trace.gates.row(t);
            let mut dz_row = dz.row_mut(t);
            for k in 0..h {
                let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                let c = trace.cells[[t, k]];
                let c_prev = if t > 0 { trace.cells[[t - 1, k]] } else { 0.0 };
                let tc = c.tanh();
                let dht = dh[[t, k]] + dh_next[k];
                let d_o = dht * tc;
                let dc = dht * o * (1.0 - tc * tc) + dc_next[k];
                dz_row[k] = dc * g * i * (1.0 - i);
                dz_row[h + k] = dc * c_prev * f * (1.0 - f);
                dz_row[2 * h + k] = dc * i * (1.0 - g * g);
                dz_row[3 * h + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            dh_next = self.wh.t().dot(&dz.row(t));
        }
        general_mat_mul(1.0, &dz.t(), &x, 1.0, &mut grad.wx);
        grad.b += &dz.sum_axis(Axis(0));
        if steps > 1 {
            let dz_tail = dz.slice(s![1.., ..]);
            let h_head = trace.hidden.slice(s![..steps - 1, ..]);
            general_mat_mul(1.0, &dz_tail.t(), &h_head, 1.0, &mut grad.wh);
        }
        dz.dot(&self.wx)
    }
}

impl Params for Lstm {
    fn params(&self) -> Vec<&[f64]> {
        vec![slice2(&self.wx), slice2(&self.wh), slice1(&self.b)]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice2_mut(&mut self.wx), slice2_mut(&mut self.wh), slice1_mut(&mut self.b)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{max_relative_error, sample_coords, zeros_like};
    use rand::SeedableRng;

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lstm = Lstm::new(3, 4, &mut rng);
        let x = uniform_matrix(5, 3, 1.0, &mut rng);
        let target = uniform_matrix(5, 4, 1.0, &mut rng);
        // loss = sum(hidden * target)
        let loss = |m: &Lstm| (&m.forward(x.view()).hidden * &target).sum();
        let trace = lstm.forward(x.view());
        let mut grad = zeros_like(&lstm);
        let dx = lstm.backward(x.view(), &trace, target.view(), &mut grad);

        let coords: Vec<_> = sample_coords(&lstm, 30, &mut rng).concat();
        let err = max_relative_error(&mut lstm, &grad, &coords, 1e-5, 1e-8, loss);
        assert!(err < 1e-5, "{err}");

        // Input gradient.
        for (t, k) in [(0, 0), (2, 1), (4, 2)] {
            let mut xp = x.clone();
            xp[[t, k]] += 1e-5;
            let mut xm = x.clone();
            xm[[t, k]] -= 1e-5;
            let num = ((&lstm.forward(xp.view()).hidden * &target).sum()
                - (&lstm.forward(xm.view()).hidden * &target).sum())
                / 2e-5;
            assert!((num - dx[[t, k]]).abs() < 1e-6);
        }
    }
}
