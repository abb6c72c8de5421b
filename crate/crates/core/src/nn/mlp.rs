use std::ops::Range;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix, View};
use crate::error::{Error, Result};
use crate::seeds;

/// One affine layer. Weights are stored `fan_in x fan_out` so a batch
/// `X` (rows = samples) maps to `X * W + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Matrix::zeros(fan_in, fan_out),
            b: vec![0.0; fan_out],
        }
    }
}

/// Multilayer perceptron with ReLU hidden layers and a linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations saved by [`Mlp::forward`] for the backward pass.
/// `inputs[l]` is the input of layer `l`.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
}

/// Parameter gradients, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.as_slice(), l.b.as_slice()])
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.w.as_mut_slice().iter_mut().for_each(|v| *v *= k);
            l.b.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// Rescales so the global norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        if max_norm.is_finite() {
            let n = self.norm();
            if n > max_norm {
                self.scale(max_norm / n);
            }
        }
    }
}

impl Mlp {
    /// Network with the given layer widths, `[input, hidden.., output]`.
    /// Weights are Xavier-normal from `seed`, biases zero; with
    /// `zero_output` the last layer starts at exactly zero.
    pub fn new(sizes: &[usize], seed: u64, zero_output: bool) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let mut rng = seeds::rng(seed, seeds::stream::NETWORK_INIT);
        let n_layers = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for (l, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut layer = Dense::zeros(fan_in, fan_out);
            if !(zero_output && l == n_layers - 1) {
                let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("finite std");
                for v in layer.w.as_mut_slice() {
                    *v = normal.sample(&mut rng);
                }
            }
            layers.push(layer);
        }
        Ok(Self { layers })
    }

    /// Network from explicit layers; consecutive widths must chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a network needs at least one layer"));
        }
        for l in &layers {
            if l.w.cols() != l.b.len() {
                return Err(Error::shape("layer bias length", l.w.cols(), l.b.len()));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].w.cols() != pair[1].w.rows() {
                return Err(Error::shape("layer input width", pair[0].w.cols(), pair[1].w.rows()));
            }
        }
        Ok(Self { layers })
    }

    /// Two hidden layers of `hidden` units.
    pub fn two_hidden(input: usize, hidden: usize, output: usize, seed: u64, zero_output: bool) -> Result<Self> {
        Self::new(&[input, hidden, hidden, output], seed, zero_output)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.b.len()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.b.len())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.as_slice().len() + l.b.len()).sum()
    }

    /// Weights then bias of each layer, in layer order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.as_slice(), l.b.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()])
            .collect()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.w.rows(), l.w.cols()))
                .collect(),
        }
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("network input width", self.input_dim(), x.cols()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(cur.rows(), layer.b.len());
            for r in 0..z.rows() {
                z.row_mut(r).copy_from_slice(&layer.b);
            }
            gemm(1.0, View::of(&cur), View::of(&layer.w), 1.0, &mut z);
            if l + 1 < self.layers.len() {
                z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut cur, z));
        }
        Ok((cur, ForwardCache { inputs }))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.forward(x).map(|(y, _)| y)
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec());
        Ok(self.predict(&m)?.into_vec())
    }

    /// Gradients of `sum(output .* grad_output)` with respect to the
    /// parameters and the input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<(Gradients, Matrix)> {
        let (g, dx) = self.backward_impl(cache, grad_output, true, Some(0..self.input_dim()))?;
        Ok((g.expect("requested"), dx.expect("requested")))
    }

    /// Parameter gradients only.
    pub fn param_gradients(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Gradients> {
        let (g, _) = self.backward_impl(cache, grad_output, true, None)?;
        Ok(g.expect("requested"))
    }

    /// Input gradient restricted to the input columns in `cols`; parameter
    /// gradients are not formed.
    pub fn input_gradient(&self, cache: &ForwardCache, grad_output: &Matrix, cols: Range<usize>) -> Result<Matrix> {
        let (_, dx) = self.backward_impl(cache, grad_output, false, Some(cols))?;
        Ok(dx.expect("requested"))
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        grad_output: &Matrix,
        want_params: bool,
        input_cols: Option<Range<usize>>,
    ) -> Result<(Option<Gradients>, Option<Matrix>)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::shape("forward cache depth", self.layers.len(), cache.inputs.len()));
        }
        let batch = cache.inputs[0].rows();
        if grad_output.cols() != self.output_dim() {
            return Err(Error::shape("output gradient width", self.output_dim(), grad_output.cols()));
        }
        if grad_output.rows() != batch {
            return Err(Error::shape("output gradient rows", batch, grad_output.rows()));
        }
        if let Some(r) = &input_cols {
            if r.end > self.input_dim() || r.start > r.end {
                return Err(Error::shape("input gradient columns", self.input_dim(), r.end));
            }
        }

        let mut grads = want_params.then(|| self.zero_gradients());
        let mut delta = grad_output.clone();
        let mut dx = None;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let a = &cache.inputs[l];
            if let Some(g) = grads.as_mut() {
                let gl = &mut g.layers[l];
                gemm(1.0, View::of(a).t(), View::of(&delta), 0.0, &mut gl.w);
                for r in 0..delta.rows() {
                    for (gb, d) in gl.b.iter_mut().zip(delta.row(r)) {
                        *gb += d;
                    }
                }
            }
            if l > 0 {
                let mut da = Matrix::zeros(batch, layer.w.rows());
                gemm(1.0, View::of(&delta), View::of(&layer.w).t(), 0.0, &mut da);
                for (d, &act) in da.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    if act <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = da;
            } else if let Some(cols) = input_cols.clone() {
                let mut d = Matrix::zeros(batch, cols.len());
                let w_rows = View::of(&layer.w).row_range(cols.start, cols.len());
                gemm(1.0, View::of(&delta), w_rows.t(), 0.0, &mut d);
                dx = Some(d);
            }
        }
        Ok((grads, dx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_shapes_from_dimensions() {
        let n = Mlp::two_hidden(50, 64, 4, 1, false).unwrap();
        let shapes: Vec<(usize, usize)> = n.layers().iter().map(|l| (l.w.rows(), l.w.cols())).collect();
        assert_eq!(shapes, vec![(50, 64), (64, 64), (64, 4)]);
        assert_eq!(n.sizes(), vec![50, 64, 64, 4]);
    }

    #[test]
    fn zero_output_network_outputs_zero() {
        let n = Mlp::two_hidden(7, 64, 1, 3, true).unwrap();
        let y = n.forward_one(&[1.0, -2.0, 3.0, 0.5, 9.0, -4.0, 0.1]).unwrap();
        assert_eq!(y, vec![0.0]);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Mlp::two_hidden(5, 8, 2, 9, false).unwrap();
        let b = Mlp::two_hidden(5, 8, 2, 9, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Mlp::two_hidden(5, 8, 2, 10, false).unwrap());
        assert!(a.param_slices()[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_zero_params_and_zero_input_give_zero_output() {
        let mut n = Mlp::two_hidden(3, 4, 2, 0, false).unwrap();
        assert_eq!(n.forward_one(&[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        for s in n.param_slices_mut() {
            s.iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(n.forward_one(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn one_unit_toy_net_by_hand() {
        // y = w3 * relu(w2 * relu(w1 * x + b1) + b2) + b3
        let mut n = Mlp::new(&[1, 1, 1, 1], 0, false).unwrap();
        {
            let p = n.param_slices_mut();
            let vals = [2.0, -1.0, 3.0, 0.5, -1.5, 0.25];
            for (s, v) in p.into_iter().zip(vals) {
                s[0] = v;
            }
        }
        // x = 1.5: h1 = relu(3 - 1) = 2, h2 = relu(6 + 0.5) = 6.5, y = -9.75 + 0.25
        assert_eq!(n.forward_one(&[1.5]).unwrap(), vec![-9.5]);
        // x = 0.2: h1 = relu(0.4 - 1) = 0, h2 = 0.5, y = -0.75 + 0.25
        assert_eq!(n.forward_one(&[0.2]).unwrap(), vec![-0.5]);
    }

    #[test]
    fn linear_net_input_gradient_is_w_transpose_times_upstream() {
        let n = Mlp::new(&[3, 2], 4, false).unwrap();
        let x = Matrix::from_vec(1, 3, vec![0.3, -0.7, 1.1]);
        let (_, cache) = n.forward(&x).unwrap();
        let up = Matrix::from_vec(1, 2, vec![1.5, -2.0]);
        let (_, dx) = n.backward(&cache, &up).unwrap();
        let w = &n.layers()[0].w;
        for i in 0..3 {
            let want = w.get(i, 0) * 1.5 + w.get(i, 1) * -2.0;
            assert!((dx.get(0, i) - want).abs() < 1e-15);
        }
        let slice = n.input_gradient(&cache, &up, 1..3).unwrap();
        assert_eq!(slice.as_slice(), &dx.as_slice()[1..3]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let n = Mlp::two_hidden(4, 6, 3, 2, false).unwrap();
        let x = Matrix::from_vec(2, 4, vec![0.1, 0.2, -0.3, 0.4, 1.0, -1.0, 0.5, 0.0]);
        let (_, cache) = n.forward(&x).unwrap();
        let (g, dx) = n.backward(&cache, &Matrix::zeros(2, 3)).unwrap();
        assert_eq!(g.norm(), 0.0);
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let n = Mlp::two_hidden(4, 6, 3, 2, false).unwrap();
        assert!(n.forward_one(&[1.0; 5]).is_err());
        let (_, cache) = n.forward(&Matrix::zeros(2, 4)).unwrap();
        assert!(n.backward(&cache, &Matrix::zeros(2, 2)).is_err());
        assert!(n.backward(&cache, &Matrix::zeros(3, 3)).is_err());
        assert!(Mlp::new(&[3], 0, false).is_err());
        assert!(Mlp::new(&[3, 0, 1], 0, false).is_err());
    }

    #[test]
    fn relu_layer_is_positively_homogeneous() {
        let mut n = Mlp::new(&[3, 5, 2], 6, false).unwrap();
        let x = Matrix::from_vec(1, 3, vec![0.4, -0.2, 0.9]);
        let y1 = n.predict(&x).unwrap();
        n.param_slices_mut()[0].iter_mut().for_each(|v| *v *= 2.5);
        let y2 = n.predict(&x).unwrap();
        for (a, b) in y1.as_slice().iter().zip(y2.as_slice()) {
            assert!((b - 2.5 * a).abs() < 1e-12);
        }
    }
}
