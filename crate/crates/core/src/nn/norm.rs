//! Layer normalization with learned scale/shift.

use super::tensor::{check_dim, join_name, NnError, ParamVisit, Tensor};

pub const DEFAULT_LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
    pub ggamma: Tensor,
    pub gbeta: Tensor,
}

impl LayerNormParams {
    /// gamma = 1, beta = 0 identity-normalization start.
    pub fn new(dim: usize, eps: f64) -> Self {
        LayerNormParams {
            gamma: Tensor::from_vec(&[dim], vec![1.0; dim]),
            beta: Tensor::zeros(&[dim]),
            eps,
            ggamma: Tensor::zeros(&[dim]),
            gbeta: Tensor::zeros(&[dim]),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.numel()
    }
}

impl ParamVisit for LayerNormParams {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        f(&join_name(prefix, "gamma"), &mut self.gamma, &mut self.ggamma);
        f(&join_name(prefix, "beta"), &mut self.beta, &mut self.gbeta);
    }
}

#[derive(Debug, Clone)]
pub struct LnCache {
    pub xhat: Vec<f64>,
    pub inv_std: f64,
}

/// gamma .* (x - mean) / sqrt(var + eps) + beta, with mean/var over the
/// components of `x`.
pub fn layer_norm(x: &[f64], p: &LayerNormParams) -> Result<Vec<f64>, NnError> {
    Ok(layer_norm_cached(x, p)?.0)
}

pub fn layer_norm_cached(x: &[f64], p: &LayerNormParams) -> Result<(Vec<f64>, LnCache), NnError> {
    check_dim("layer_norm input", x.len(), p.dim())?;
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + p.eps).sqrt();
    let xhat: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let y: Vec<f64> = xhat
        .iter()
        .zip(p.gamma.data())
        .zip(p.beta.data())
        .map(|((xh, g), b)| g * xh + b)
        .collect();
    Ok((y, LnCache { xhat, inv_std }))
}

/// Accumulates gamma/beta gradients and returns dL/dx.
pub fn layer_norm_backward(p: &mut LayerNormParams, cache: &LnCache, dy: &[f64]) -> Vec<f64> {
    let n = dy.len() as f64;
    for ((gg, gb), (d, xh)) in p
        .ggamma
        .data_mut()
        .iter_mut()
        .zip(p.gbeta.data_mut().iter_mut())
        .zip(dy.iter().zip(&cache.xhat))
    {
        *gg += d * xh;
        *gb += d;
    }
    let dxhat: Vec<f64> = dy.iter().zip(p.gamma.data()).map(|(d, g)| d * g).collect();
    let mean_dxhat = dxhat.iter().sum::<f64>() / n;
    let mean_dxhat_xhat = dxhat.iter().zip(&cache.xhat).map(|(d, xh)| d * xh).sum::<f64>() / n;
    dxhat
        .iter()
        .zip(&cache.xhat)
        .map(|(d, xh)| cache.inv_std * (d - mean_dxhat - xh * mean_dxhat_xhat))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_vector_normalizes_to_beta() {
        let p = LayerNormParams::new(4, DEFAULT_LN_EPS);
        let y = layer_norm(&[3.0, 3.0, 3.0, 3.0], &p).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn unit_variance_pair_is_preserved() {
        let p = LayerNormParams::new(2, 1e-12);
        let y = layer_norm(&[1.0, -1.0], &p).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-6);
        assert!((y[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn output_mean_is_mean_beta() {
        let mut p = LayerNormParams::new(5, DEFAULT_LN_EPS);
        p.beta.data_mut().copy_from_slice(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let y = layer_norm(&[0.9, -2.0, 3.5, 0.0, 1.25], &p).unwrap();
        let mean = y.iter().sum::<f64>() / 5.0;
        let beta_mean = 0.3;
        assert!((mean - beta_mean).abs() < 1e-6);
    }
}
