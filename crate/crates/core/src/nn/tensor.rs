//! Dense row-major f64 tensor plus the handful of BLAS-1/2 kernels the
//! models need. Everything trains in 64-bit floats.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn check_dim(what: &str, actual: usize, expected: usize) -> Result<(), NnError> {
    if actual != expected {
        return Err(NnError::Shape(format!("{what}: expected {expected}, got {actual}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; numel] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Tensor { shape: shape.to_vec(), data }
    }

    /// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialization.
    pub fn uniform_init<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Self {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.random_range(-bound..bound)).collect();
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let cols = self.shape[1];
        &mut self.data[i * cols..(i + 1) * cols]
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    pub fn add2(&mut self, i: usize, j: usize, v: f64) {
        let cols = self.shape[1];
        self.data[i * cols + j] += v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// y = W x for W of shape [out, in].
pub fn matvec(w: &Tensor, x: &[f64], y: &mut [f64]) {
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    debug_assert_eq!(x.len(), inp);
    debug_assert_eq!(y.len(), out);
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &w.data[o * inp..(o + 1) * inp];
        *yo = dot(row, x);
    }
}

/// dx += W^T dy.
pub fn matvec_t_add(w: &Tensor, dy: &[f64], dx: &mut [f64]) {
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    debug_assert_eq!(dy.len(), out);
    debug_assert_eq!(dx.len(), inp);
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w.data[o * inp..(o + 1) * inp];
        for (xi, &wi) in dx.iter_mut().zip(row) {
            *xi += g * wi;
        }
    }
}

/// gW += dy x^T.
pub fn outer_add(gw: &mut Tensor, dy: &[f64], x: &[f64]) {
    let (out, inp) = (gw.shape()[0], gw.shape()[1]);
    debug_assert_eq!(dy.len(), out);
    debug_assert_eq!(x.len(), inp);
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut gw.data[o * inp..(o + 1) * inp];
        for (wi, &xi) in row.iter_mut().zip(x) {
            *wi += g * xi;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Visitor over a model's named (parameter, gradient) tensor pairs. The
/// optimizer, checkpointing, and gradient checks all walk this.
pub trait ParamVisit {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor));
}

pub fn zero_grads<M: ParamVisit + ?Sized>(model: &mut M) {
    model.visit_params("", &mut |_, _, grad| grad.fill(0.0));
}

pub fn all_params_finite<M: ParamVisit + ?Sized>(model: &mut M) -> bool {
    let mut ok = true;
    model.visit_params("", &mut |_, value, _| ok &= value.all_finite());
    ok
}

pub fn collect_params<M: ParamVisit + ?Sized>(model: &mut M) -> Vec<(String, Tensor)> {
    let mut out = Vec::new();
    model.visit_params("", &mut |name, value, _| out.push((name.to_string(), value.clone())));
    out
}

pub fn collect_grads<M: ParamVisit + ?Sized>(model: &mut M) -> Vec<(String, Tensor)> {
    let mut out = Vec::new();
    model.visit_params("", &mut |name, _, grad| out.push((name.to_string(), grad.clone())));
    out
}

pub fn restore_params<M: ParamVisit + ?Sized>(model: &mut M, saved: &[(String, Tensor)]) {
    let mut idx = 0;
    model.visit_params("", &mut |name, value, _| {
        assert_eq!(saved[idx].0, name, "parameter order changed");
        *value = saved[idx].1.clone();
        idx += 1;
    });
    assert_eq!(idx, saved.len(), "parameter count changed");
}

pub fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn matvec_against_hand_computation() {
        let w = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = [1.0, 0.5, -1.0];
        let mut y = [0.0; 2];
        matvec(&w, &x, &mut y);
        assert_eq!(y, [-1.0, 0.5]);

        let mut dx = [0.0; 3];
        matvec_t_add(&w, &[1.0, -1.0], &mut dx);
        assert_eq!(dx, [-3.0, -3.0, -3.0]);

        let mut gw = Tensor::zeros(&[2, 3]);
        outer_add(&mut gw, &[2.0, 0.0], &[1.0, 0.5, -1.0]);
        assert_eq!(gw.data(), &[2.0, 1.0, -2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_init_respects_fan_in_bound() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let t = Tensor::uniform_init(&[8, 16], 16, &mut rng);
        let bound = (1.0f64 / 16.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() < bound));
    }
}
