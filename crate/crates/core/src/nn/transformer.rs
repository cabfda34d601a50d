//! Single-head transformer encoder block over an unordered set of vectors.
//!
//! No positional encoding is added, so the block is exactly
//! row-permutation-equivariant: the key-value pairs it consumes form a set.
//! Layout is the classic post-norm residual stack:
//! `y = LN2(n1 + FF(n1))` with `n1 = LN1(x + Attn(x))`.

use rand::Rng;

use super::dense::{Activation, Dense};
use super::norm::{layer_norm_backward, layer_norm_cached, LayerNormParams, LnCache};
use super::tensor::{check_dim, join_name, NnError, ParamVisit, Tensor};

#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub wq: Dense,
    pub wk: Dense,
    pub wv: Dense,
    pub wo: Dense,
    pub ln1: LayerNormParams,
    pub ff1: Dense,
    pub ff2: Dense,
    pub ln2: LayerNormParams,
    dim: usize,
}

#[derive(Debug)]
pub struct TransformerCache {
    xs: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    attn: Vec<Vec<f64>>,
    heads: Vec<Vec<f64>>,
    o: Vec<Vec<f64>>,
    n1: Vec<Vec<f64>>,
    ln1_caches: Vec<LnCache>,
    ff_hidden: Vec<Vec<f64>>,
    ff_out: Vec<Vec<f64>>,
    ln2_caches: Vec<LnCache>,
}

impl TransformerBlock {
    pub fn new<R: Rng>(dim: usize, ff_dim: usize, ln_eps: f64, rng: &mut R) -> Self {
        TransformerBlock {
            wq: Dense::new(dim, dim, Activation::Identity, rng),
            wk: Dense::new(dim, dim, Activation::Identity, rng),
            wv: Dense::new(dim, dim, Activation::Identity, rng),
            wo: Dense::new(dim, dim, Activation::Identity, rng),
            ln1: LayerNormParams::new(dim, ln_eps),
            ff1: Dense::new(dim, ff_dim, Activation::Tanh, rng),
            ff2: Dense::new(ff_dim, dim, Activation::Identity, rng),
            ln2: LayerNormParams::new(dim, ln_eps),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NnError> {
        Ok(self.forward_cached(xs)?.0)
    }

    pub fn forward_cached(
        &self,
        xs: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, TransformerCache), NnError> {
        for x in xs {
            check_dim("transformer input", x.len(), self.dim)?;
        }
        let n = xs.len();
        let scale = 1.0 / (self.dim as f64).sqrt();

        let q: Vec<Vec<f64>> = xs.iter().map(|x| self.wq.forward(x)).collect::<Result<_, _>>()?;
        let k: Vec<Vec<f64>> = xs.iter().map(|x| self.wk.forward(x)).collect::<Result<_, _>>()?;
        let v: Vec<Vec<f64>> = xs.iter().map(|x| self.wv.forward(x)).collect::<Result<_, _>>()?;

        let mut attn = Vec::with_capacity(n);
        let mut heads = Vec::with_capacity(n);
        for qi in &q {
            let scores: Vec<f64> = k
                .iter()
                .map(|kj| super::tensor::dot(qi, kj) * scale)
                .collect();
            let weights = super::loss::softmax(&scores);
            let mut head = vec![0.0; self.dim];
            for (w, vj) in weights.iter().zip(&v) {
                super::tensor::axpy(*w, vj, &mut head);
            }
            attn.push(weights);
            heads.push(head);
        }

        let o: Vec<Vec<f64>> = heads.iter().map(|h| self.wo.forward(h)).collect::<Result<_, _>>()?;
        let mut n1 = Vec::with_capacity(n);
        let mut ln1_caches = Vec::with_capacity(n);
        for (x, oi) in xs.iter().zip(&o) {
            let r1: Vec<f64> = x.iter().zip(oi).map(|(a, b)| a + b).collect();
            let (y, cache) = layer_norm_cached(&r1, &self.ln1)?;
            n1.push(y);
            ln1_caches.push(cache);
        }

        let mut ff_hidden = Vec::with_capacity(n);
        let mut ff_out = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut ln2_caches = Vec::with_capacity(n);
        for row in &n1 {
            let h = self.ff1.forward(row)?;
            let m = self.ff2.forward(&h)?;
            let r2: Vec<f64> = row.iter().zip(&m).map(|(a, b)| a + b).collect();
            let (y, cache) = layer_norm_cached(&r2, &self.ln2)?;
            ff_hidden.push(h);
            ff_out.push(m);
            ys.push(y);
            ln2_caches.push(cache);
        }

        Ok((
            ys,
            TransformerCache {
                xs: xs.to_vec(),
                q,
                k,
                v,
                attn,
                heads,
                o,
                n1,
                ln1_caches,
                ff_hidden,
                ff_out,
                ln2_caches,
            },
        ))
    }

    /// Backward through the block; returns per-row dx.
    pub fn backward(&mut self, cache: &TransformerCache, dys: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = cache.xs.len();
        assert_eq!(dys.len(), n);
        let scale = 1.0 / (self.dim as f64).sqrt();

        let mut dn1 = vec![vec![0.0; self.dim]; n];
        for i in 0..n {
            let dr2 = layer_norm_backward(&mut self.ln2, &cache.ln2_caches[i], &dys[i]);
            let dh = self.ff2.backward(&cache.ff_hidden[i], &cache.ff_out[i], &dr2);
            let drow = self.ff1.backward(&cache.n1[i], &cache.ff_hidden[i], &dh);
            for ((slot, a), b) in dn1[i].iter_mut().zip(&dr2).zip(&drow) {
                *slot += a + b;
            }
        }

        let mut dxs = vec![vec![0.0; self.dim]; n];
        let mut dq = vec![vec![0.0; self.dim]; n];
        let mut dk = vec![vec![0.0; self.dim]; n];
        let mut dv = vec![vec![0.0; self.dim]; n];
        for i in 0..n {
            let dr1 = layer_norm_backward(&mut self.ln1, &cache.ln1_caches[i], &dn1[i]);
            for (slot, g) in dxs[i].iter_mut().zip(&dr1) {
                *slot += g;
            }
            let dhead = self.wo.backward(&cache.heads[i], &cache.o[i], &dr1);

            let weights = &cache.attn[i];
            let dweights: Vec<f64> = cache
                .v
                .iter()
                .map(|vj| super::tensor::dot(&dhead, vj))
                .collect();
            for (j, w) in weights.iter().enumerate() {
                super::tensor::axpy(*w, &dhead, &mut dv[j]);
            }
            // Softmax backward: ds = a .* (dw - sum(a .* dw)).
            let dot_aw = super::tensor::dot(weights, &dweights);
            for (j, (&w, &dw)) in weights.iter().zip(&dweights).enumerate() {
                let ds = w * (dw - dot_aw) * scale;
                if ds == 0.0 {
                    continue;
                }
                super::tensor::axpy(ds, &cache.k[j], &mut dq[i]);
                super::tensor::axpy(ds, &cache.q[i], &mut dk[j]);
            }
        }

        for i in 0..n {
            let dx_q = self.wq.backward(&cache.xs[i], &cache.q[i], &dq[i]);
            let dx_k = self.wk.backward(&cache.xs[i], &cache.k[i], &dk[i]);
            let dx_v = self.wv.backward(&cache.xs[i], &cache.v[i], &dv[i]);
            for (((slot, a), b), c) in dxs[i].iter_mut().zip(&dx_q).zip(&dx_k).zip(&dx_v) {
                *slot += a + b + c;
            }
        }
        dxs
    }
}

impl ParamVisit for TransformerBlock {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        self.wq.visit_params(&join_name(prefix, "wq"), f);
        self.wk.visit_params(&join_name(prefix, "wk"), f);
        self.wv.visit_params(&join_name(prefix, "wv"), f);
        self.wo.visit_params(&join_name(prefix, "wo"), f);
        self.ln1.visit_params(&join_name(prefix, "ln1"), f);
        self.ff1.visit_params(&join_name(prefix, "ff1"), f);
        self.ff2.visit_params(&join_name(prefix, "ff2"), f);
        self.ln2.visit_params(&join_name(prefix, "ln2"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn permuting_rows_permutes_outputs() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        let block = TransformerBlock::new(6, 10, 1e-5, &mut rng);
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys = block.forward(&xs).unwrap();
        let perm = [2usize, 0, 3, 1];
        let xs_p: Vec<Vec<f64>> = perm.iter().map(|&i| xs[i].clone()).collect();
        let ys_p = block.forward(&xs_p).unwrap();
        for (pos, &orig) in perm.iter().enumerate() {
            for (a, b) in ys_p[pos].iter().zip(&ys[orig]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_row_attends_to_itself() {
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        let block = TransformerBlock::new(4, 8, 1e-5, &mut rng);
        let xs = vec![vec![0.1, -0.2, 0.3, 0.4]];
        let (_, cache) = block.forward_cached(&xs).unwrap();
        assert_eq!(cache.attn[0], vec![1.0]);
    }

    #[test]
    fn empty_input_yields_empty_output() {
        let mut rng = ChaCha20Rng::seed_from_u64(47);
        let block = TransformerBlock::new(4, 8, 1e-5, &mut rng);
        assert!(block.forward(&[]).unwrap().is_empty());
    }
}
