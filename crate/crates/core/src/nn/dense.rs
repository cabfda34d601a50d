//! Dense layer with optional pointwise activation, and a two-layer MLP.

use rand::Rng;

use super::tensor::{
    check_dim, join_name, matvec, matvec_t_add, outer_add, NnError, ParamVisit, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output y.
    pub fn derivative_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
    pub gw: Tensor,
    pub gb: Tensor,
    pub act: Activation,
}

impl Dense {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, act: Activation, rng: &mut R) -> Self {
        Dense {
            w: Tensor::uniform_init(&[out_dim, in_dim], in_dim, rng),
            b: Tensor::uniform_init(&[out_dim], in_dim, rng),
            gw: Tensor::zeros(&[out_dim, in_dim]),
            gb: Tensor::zeros(&[out_dim]),
            act,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        check_dim("dense input", x.len(), self.in_dim())?;
        let mut y = vec![0.0; self.out_dim()];
        matvec(&self.w, x, &mut y);
        for (yi, bi) in y.iter_mut().zip(self.b.data()) {
            *yi = self.act.apply(*yi + bi);
        }
        Ok(y)
    }

    /// Accumulates parameter gradients and returns dL/dx. `y` is the output
    /// previously returned by `forward` for this `x`.
    pub fn backward(&mut self, x: &[f64], y: &[f64], dy: &[f64]) -> Vec<f64> {
        let dz: Vec<f64> = dy
            .iter()
            .zip(y)
            .map(|(&g, &yo)| g * self.act.derivative_from_output(yo))
            .collect();
        outer_add(&mut self.gw, &dz, x);
        for (gb, &d) in self.gb.data_mut().iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut dx = vec![0.0; self.in_dim()];
        matvec_t_add(&self.w, &dz, &mut dx);
        dx
    }
}

impl ParamVisit for Dense {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        f(&join_name(prefix, "w"), &mut self.w, &mut self.gw);
        f(&join_name(prefix, "b"), &mut self.b, &mut self.gb);
    }
}

/// tanh hidden layer followed by a linear output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub hidden: Dense,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub y: Vec<f64>,
}

impl Mlp {
    pub fn new<R: Rng>(in_dim: usize, hidden_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Mlp {
            hidden: Dense::new(in_dim, hidden_dim, Activation::Tanh, rng),
            out: Dense::new(hidden_dim, out_dim, Activation::Identity, rng),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let h = self.hidden.forward(x)?;
        self.out.forward(&h)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache), NnError> {
        let h = self.hidden.forward(x)?;
        let y = self.out.forward(&h)?;
        Ok((y.clone(), MlpCache { x: x.to_vec(), h, y }))
    }

    pub fn backward(&mut self, cache: &MlpCache, dy: &[f64]) -> Vec<f64> {
        let dh = self.out.backward(&cache.h, &cache.y, dy);
        self.hidden.backward(&cache.x, &cache.h, &dh)
    }
}

impl ParamVisit for Mlp {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        self.hidden.visit_params(&join_name(prefix, "hidden"), f);
        self.out.visit_params(&join_name(prefix, "out"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_input_zero_weights_yields_activated_bias() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut layer = Dense::new(3, 2, Activation::Tanh, &mut rng);
        layer.w.fill(0.0);
        layer.b.data_mut().copy_from_slice(&[0.3, -0.7]);
        let y = layer.forward(&[0.0, 0.0, 0.0]).unwrap();
        assert!((y[0] - 0.3f64.tanh()).abs() < 1e-15);
        assert!((y[1] - (-0.7f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let layer = Dense::new(3, 2, Activation::Identity, &mut rng);
        assert!(layer.forward(&[1.0, 2.0]).is_err());
    }
}
