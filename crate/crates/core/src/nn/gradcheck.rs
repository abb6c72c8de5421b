//! Central finite-difference checks for [`Mlp`] gradients.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::Matrix;
use super::mlp::Mlp;
use crate::error::Result;

/// Denominator floor of the relative error, so that gradients that are
/// zero on both sides compare equal.
pub const REL_ERR_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradReport {
    pub max_param_rel_err: f64,
    pub max_input_rel_err: f64,
    pub params_checked: usize,
    pub inputs_checked: usize,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.max_param_rel_err.max(self.max_input_rel_err)
    }

    pub fn merge(&mut self, other: &GradReport) {
        self.max_param_rel_err = self.max_param_rel_err.max(other.max_param_rel_err);
        self.max_input_rel_err = self.max_input_rel_err.max(other.max_input_rel_err);
        self.params_checked += other.params_checked;
        self.inputs_checked += other.inputs_checked;
    }
}

/// Smallest absolute hidden pre-activation over the batch. A ReLU network
/// is smooth within this margin of its inputs and parameters.
pub fn kink_margin(net: &Mlp, x: &Matrix) -> Result<f64> {
    let mut margin = f64::INFINITY;
    let mut cur = x.clone();
    let layers = net.layers();
    for layer in &layers[..layers.len() - 1] {
        let single = Mlp::from_layers(vec![layer.clone()])?;
        let z = single.predict(&cur)?;
        margin = z.as_slice().iter().fold(margin, |m, v| m.min(v.abs()));
        let mut a = z;
        a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        cur = a;
    }
    Ok(margin)
}

/// Scalar probe `sum(net(x) .* proj)`.
fn probe(net: &Mlp, x: &Matrix, proj: &Matrix) -> Result<f64> {
    let y = net.predict(x)?;
    Ok(y.as_slice().iter().zip(proj.as_slice()).map(|(a, b)| a * b).sum())
}

/// Compares every analytic parameter and input gradient of
/// `sum(net(x) .* proj)` with central differences of step `eps`.
pub fn check_mlp(net: &Mlp, x: &Matrix, proj: &Matrix, eps: f64) -> Result<GradReport> {
    let (_, cache) = net.forward(x)?;
    let (grads, dx) = net.backward(&cache, proj)?;
    let mut report = GradReport::default();

    let mut work = net.clone();
    for (gi, g) in grads.slices().iter().enumerate() {
        for (pi, &analytic) in g.iter().enumerate() {
            let base = work.param_slices()[gi][pi];
            work.param_slices_mut()[gi][pi] = base + eps;
            let up = probe(&work, x, proj)?;
            work.param_slices_mut()[gi][pi] = base - eps;
            let down = probe(&work, x, proj)?;
            work.param_slices_mut()[gi][pi] = base;
            let numeric = (up - down) / (2.0 * eps);
            report.max_param_rel_err = report.max_param_rel_err.max(relative_error(analytic, numeric));
            report.params_checked += 1;
        }
    }

    let mut xp = x.clone();
    for i in 0..x.as_slice().len() {
        let base = x.as_slice()[i];
        xp.as_mut_slice()[i] = base + eps;
        let up = probe(net, &xp, proj)?;
        xp.as_mut_slice()[i] = base - eps;
        let down = probe(net, &xp, proj)?;
        xp.as_mut_slice()[i] = base;
        let numeric = (up - down) / (2.0 * eps);
        report.max_input_rel_err = report.max_input_rel_err.max(relative_error(dx.as_slice()[i], numeric));
        report.inputs_checked += 1;
    }
    Ok(report)
}

/// A random MLP with 1-3 hidden layers, every width in `1..=max_dim`, plus
/// a batch of inputs kept at least `margin` away from every ReLU kink, and
/// a random output projection.
pub fn random_case<R: Rng + ?Sized>(rng: &mut R, max_dim: usize, batch: usize, margin: f64) -> Result<(Mlp, Matrix, Matrix)> {
    loop {
        let depth = rng.random_range(2..=4);
        let sizes: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=max_dim)).collect();
        let mut net = Mlp::new(&sizes, rng.random(), false)?;
        for s in net.param_slices_mut() {
            for v in s.iter_mut() {
                *v += 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            }
        }
        let normal = |rng: &mut R, n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(rng)).collect() };
        let proj = Matrix::from_vec(batch, sizes[depth], normal(rng, batch * sizes[depth]));
        for _ in 0..50 {
            let x = Matrix::from_vec(batch, sizes[0], normal(rng, batch * sizes[0]));
            if kink_margin(&net, &x)? >= margin {
                return Ok((net, x, proj));
            }
        }
    }
}
