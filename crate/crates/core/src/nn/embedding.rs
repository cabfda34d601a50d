//! Hash-bucketed trainable embedding table. Tokens and addresses map to
//! buckets through FNV-1a so the mapping is deterministic across runs and
//! platforms (the std hasher is randomized and unusable here).

use rand::Rng;

use super::tensor::{join_name, ParamVisit, Tensor};

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn bucket_of(bytes: &[u8], buckets: usize) -> usize {
    (fnv1a64(bytes) % buckets as u64) as usize
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: Tensor,
    pub grad: Tensor,
}

impl Embedding {
    pub fn new<R: Rng>(buckets: usize, dim: usize, rng: &mut R) -> Self {
        Embedding {
            table: Tensor::uniform_init(&[buckets, dim], dim, rng),
            grad: Tensor::zeros(&[buckets, dim]),
        }
    }

    pub fn buckets(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn bucket(&self, bytes: &[u8]) -> usize {
        bucket_of(bytes, self.buckets())
    }

    pub fn lookup(&self, id: usize) -> &[f64] {
        self.table.row(id)
    }

    pub fn accumulate(&mut self, id: usize, g: &[f64]) {
        for (slot, &gi) in self.grad.row_mut(id).iter_mut().zip(g) {
            *slot += gi;
        }
    }

    /// Mean of the rows for `ids`; all-zero vector when `ids` is empty.
    pub fn mean_pool(&self, ids: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        if ids.is_empty() {
            return out;
        }
        for &id in ids {
            for (o, &v) in out.iter_mut().zip(self.lookup(id)) {
                *o += v;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }

    pub fn mean_pool_backward(&mut self, ids: &[usize], dy: &[f64]) {
        if ids.is_empty() {
            return;
        }
        let inv = 1.0 / ids.len() as f64;
        let scaled: Vec<f64> = dy.iter().map(|g| g * inv).collect();
        for &id in ids {
            self.accumulate(id, &scaled);
        }
    }
}

impl ParamVisit for Embedding {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        f(&join_name(prefix, "table"), &mut self.table, &mut self.grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn fnv_is_the_reference_function() {
        // Published FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn mean_pool_of_duplicates_matches_single() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let emb = Embedding::new(16, 4, &mut rng);
        let one = emb.mean_pool(&[5]);
        let twice = emb.mean_pool(&[5, 5]);
        assert_eq!(one, twice);
        assert_eq!(emb.mean_pool(&[]), vec![0.0; 4]);
    }
}
