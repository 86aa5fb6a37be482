//! Small dense networks with hand-written backpropagation.
//!
//! Batches are row-major `[batch, features]` arrays; matrix products go
//! through ndarray so they hit the blocked GEMM kernels.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Elu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Elu => {
                if y > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Random matrix with orthonormal rows (or columns, whichever is fewer),
/// scaled by `gain`.
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    let (n, m) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    // n vectors of length m, Gram-Schmidt'd.
    let mut q = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        loop {
            let mut v: Array1<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            for j in 0..i {
                let qj = q.row(j);
                let d = v.dot(&qj);
                v.scaled_add(-d, &qj);
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-8 {
                q.row_mut(i).assign(&(v / norm));
                break;
            }
        }
    }
    let q = q * gain;
    if rows <= cols {
        q
    } else {
        q.reversed_axes().as_standard_layout().to_owned()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `[out, in]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden: Activation,
}

/// Activations saved by [`Mlp::forward_cached`] for the backward pass.
pub struct MlpCache {
    /// Input to each layer; the last entry is the network output.
    acts: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds at least the input")
    }
}

/// Gradients with the same shapes as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub weight: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn sq_norm(&self) -> f64 {
        self.weight.iter().map(|w| w.iter().map(|x| x * x).sum::<f64>()).sum::<f64>()
            + self.bias.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>()).sum::<f64>()
    }

    pub fn scale(&mut self, k: f64) {
        self.weight.iter_mut().for_each(|w| *w *= k);
        self.bias.iter_mut().for_each(|b| *b *= k);
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weight.len());
        for (w, b) in self.weight.iter().zip(&self.bias) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`. Hidden layers get orthogonal init with
    /// `hidden_gain`, the output layer with `output_gain`; biases start at 0.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let gain = if i + 1 == n { output_gain } else { hidden_gain };
                Dense {
                    weight: orthogonal(sizes[i + 1], sizes[i], gain, rng),
                    bias: Array1::zeros(sizes[i + 1]),
                }
            })
            .collect();
        Self { layers, hidden }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn layer_forward(&self, i: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let layer = &self.layers[i];
        let mut z = x.dot(&layer.weight.t());
        z += &layer.bias;
        if i + 1 < self.layers.len() {
            let act = self.hidden;
            z.mapv_inplace(|v| act.apply(v));
        }
        z
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = self.layer_forward(0, x);
        for i in 1..self.layers.len() {
            h = self.layer_forward(i, h.view());
        }
        h
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.forward(x).into_raw_vec_and_offset().0
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> MlpCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for i in 0..self.layers.len() {
            let next = self.layer_forward(i, acts[i].view());
            acts.push(next);
        }
        MlpCache { acts }
    }

    /// Backpropagate `grad_out = dL/d(output)` through a cached forward pass.
    pub fn backward(&self, cache: &MlpCache, grad_out: ArrayView2<f64>) -> MlpGrads {
        self.backward_with_input(cache, grad_out).0
    }

    /// Like [`Mlp::backward`], also returning `dL/d(input)`.
    pub fn backward_with_input(&self, cache: &MlpCache, grad_out: ArrayView2<f64>) -> (MlpGrads, Array2<f64>) {
        let n = self.layers.len();
        let mut weight = vec![Array2::zeros((0, 0)); n];
        let mut bias = vec![Array1::zeros(0); n];
        let mut delta = grad_out.to_owned();
        for i in (0..n).rev() {
            if i + 1 < n {
                let act = self.hidden;
                ndarray::Zip::from(&mut delta)
                    .and(&cache.acts[i + 1])
                    .for_each(|d, &y| *d *= act.derivative_from_output(y));
            }
            weight[i] = delta.t().dot(&cache.acts[i]);
            bias[i] = delta.sum_axis(Axis(0));
            delta = delta.dot(&self.layers[i].weight);
        }
        (MlpGrads { weight, bias }, delta)
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for layer in &mut self.layers {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Adam over a list of parameter slices. The slice layout must stay the
/// same between calls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient lists differ");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            assert_eq!(p.len(), g.len());
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}
