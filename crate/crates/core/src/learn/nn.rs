use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected network with a linear output layer. Parameters live in
/// one flat vector: per layer the row-major weight matrix then the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output sizes");
        let n = Self::count(sizes);
        let mut params = Vec::with_capacity(n);
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0] as f64, w[1] as f64);
            let limit = match activation {
                Activation::Tanh => (6.0 / (fan_in + fan_out)).sqrt(),
                Activation::Relu => (6.0 / fan_in).sqrt(),
            };
            for _ in 0..w[0] * w[1] {
                params.push(rng.gen_range(-limit..limit));
            }
            params.extend(std::iter::repeat(0.0).take(w[1]));
        }
        Self {
            sizes: sizes.to_vec(),
            activation,
            params,
        }
    }

    pub fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Multiplies the output layer (weights and bias) by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let k = self.sizes.len() - 1;
        let len = self.sizes[k - 1] * self.sizes[k] + self.sizes[k];
        let start = self.params.len() - len;
        for p in &mut self.params[start..] {
            *p *= factor;
        }
    }

    /// Sets the bias of output unit `i`.
    pub fn set_output_bias(&mut self, i: usize, value: f64) {
        let n = self.params.len();
        let out = self.output_dim();
        self.params[n - out + i] = value;
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).pop().unwrap()
    }

    /// Returns every layer's output, input first, network output last.
    pub fn forward_cached(&self, x: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(x.len(), self.input_dim());
        let last = self.sizes.len() - 2;
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let input = &acts[l];
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let mut out = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let z = bias[j] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out.push(if l == last { z } else { self.activation.apply(z) });
            }
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        acts
    }

    /// Accumulates `d(dout . y)/dθ` into `grad` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, acts: &[Vec<f64>], dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = dout.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[off + j * n_in..off + (j + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += d * xi;
                }
                grad[off + n_in * n_out + j] += d;
            }
            let weights = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for j in 0..n_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                for (p, w) in prev.iter_mut().zip(&weights[j * n_in..(j + 1) * n_in]) {
                    *p += d * w;
                }
            }
            if l > 0 {
                for (p, y) in prev.iter_mut().zip(input) {
                    *p *= self.activation.slope(*y);
                }
            }
            delta = prev;
        }
        delta
    }

    /// `self <- rate * online + (1 - rate) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, rate: f64) {
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = rate * o + (1.0 - rate) * *t;
        }
    }
}

/// Adam optimizer over a flat parameter vector (minimizes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` so its Euclidean norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= k;
        }
    }
    norm
}
