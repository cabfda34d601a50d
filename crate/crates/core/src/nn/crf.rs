//! Linear-chain CRF: log-partition by the forward algorithm, Viterbi
//! decoding, and exact NLL gradients via forward-backward.
//!
//! A path y_1..y_T scores
//! `start[y_1] + sum_t emissions[t][y_t] + sum_t transitions[y_t][y_{t+1}] + end[y_T]`.

use super::loss::log_sum_exp;
use super::tensor::{join_name, NnError, ParamVisit, Tensor};

#[derive(Debug, Clone)]
pub struct CrfParams {
    pub transitions: Tensor,
    pub start: Tensor,
    pub end: Tensor,
    pub gtransitions: Tensor,
    pub gstart: Tensor,
    pub gend: Tensor,
}

impl CrfParams {
    pub fn new(tags: usize) -> Self {
        CrfParams {
            transitions: Tensor::zeros(&[tags, tags]),
            start: Tensor::zeros(&[tags]),
            end: Tensor::zeros(&[tags]),
            gtransitions: Tensor::zeros(&[tags, tags]),
            gstart: Tensor::zeros(&[tags]),
            gend: Tensor::zeros(&[tags]),
        }
    }

    pub fn tags(&self) -> usize {
        self.start.numel()
    }

    fn check(&self, emissions: &[Vec<f64>]) -> Result<(), NnError> {
        if emissions.is_empty() {
            return Err(NnError::Shape("empty emission sequence".into()));
        }
        for row in emissions {
            if row.len() != self.tags() {
                return Err(NnError::Shape(format!(
                    "emission width {} does not match {} tags",
                    row.len(),
                    self.tags()
                )));
            }
        }
        Ok(())
    }

    pub fn path_score(&self, emissions: &[Vec<f64>], path: &[usize]) -> f64 {
        let t_len = emissions.len();
        let mut score = self.start.data()[path[0]] + emissions[0][path[0]];
        for t in 1..t_len {
            score += self.transitions.at2(path[t - 1], path[t]) + emissions[t][path[t]];
        }
        score + self.end.data()[path[t_len - 1]]
    }

    /// log sum over all tag paths of exp(path score).
    pub fn log_partition(&self, emissions: &[Vec<f64>]) -> Result<f64, NnError> {
        self.check(emissions)?;
        let k = self.tags();
        let mut alpha: Vec<f64> = (0..k).map(|y| self.start.data()[y] + emissions[0][y]).collect();
        let mut scratch = vec![0.0; k];
        for em in &emissions[1..] {
            let mut next = vec![0.0; k];
            for (y, slot) in next.iter_mut().enumerate() {
                for (yp, s) in scratch.iter_mut().enumerate() {
                    *s = alpha[yp] + self.transitions.at2(yp, y);
                }
                *slot = em[y] + log_sum_exp(&scratch);
            }
            alpha = next;
        }
        for (y, s) in scratch.iter_mut().enumerate() {
            *s = alpha[y] + self.end.data()[y];
        }
        Ok(log_sum_exp(&scratch))
    }

    /// Maximum-score path and its score. Ties break toward the lowest tag
    /// index at every backtrack step.
    pub fn viterbi(&self, emissions: &[Vec<f64>]) -> Result<(Vec<usize>, f64), NnError> {
        self.check(emissions)?;
        let k = self.tags();
        let t_len = emissions.len();
        let mut score: Vec<f64> = (0..k).map(|y| self.start.data()[y] + emissions[0][y]).collect();
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(t_len - 1);
        for em in &emissions[1..] {
            let mut next = vec![f64::NEG_INFINITY; k];
            let mut ptr = vec![0usize; k];
            for y in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut best_prev = 0;
                for yp in 0..k {
                    let s = score[yp] + self.transitions.at2(yp, y);
                    if s > best {
                        best = s;
                        best_prev = yp;
                    }
                }
                next[y] = best + em[y];
                ptr[y] = best_prev;
            }
            score = next;
            back.push(ptr);
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_tag = 0;
        for y in 0..k {
            let s = score[y] + self.end.data()[y];
            if s > best {
                best = s;
                best_tag = y;
            }
        }
        let mut path = vec![best_tag];
        for ptr in back.iter().rev() {
            path.push(ptr[*path.last().unwrap()]);
        }
        path.reverse();
        Ok((path, best))
    }

    /// NLL of the gold path (log_partition - gold score, always >= 0) and
    /// dL/demissions. Transition/start/end gradients accumulate internally.
    pub fn nll_and_grad(
        &mut self,
        emissions: &[Vec<f64>],
        gold: &[usize],
    ) -> Result<(f64, Vec<Vec<f64>>), NnError> {
        self.check(emissions)?;
        if gold.len() != emissions.len() {
            return Err(NnError::Shape(format!(
                "gold path length {} != sequence length {}",
                gold.len(),
                emissions.len()
            )));
        }
        let k = self.tags();
        if gold.iter().any(|&y| y >= k) {
            return Err(NnError::Shape("gold tag out of range".into()));
        }
        let t_len = emissions.len();

        let mut alpha = vec![vec![0.0; k]; t_len];
        for y in 0..k {
            alpha[0][y] = self.start.data()[y] + emissions[0][y];
        }
        let mut scratch = vec![0.0; k];
        for t in 1..t_len {
            for y in 0..k {
                for (yp, s) in scratch.iter_mut().enumerate() {
                    *s = alpha[t - 1][yp] + self.transitions.at2(yp, y);
                }
                alpha[t][y] = emissions[t][y] + log_sum_exp(&scratch);
            }
        }
        let mut beta = vec![vec![0.0; k]; t_len];
        for y in 0..k {
            beta[t_len - 1][y] = self.end.data()[y];
        }
        for t in (0..t_len - 1).rev() {
            for y in 0..k {
                for (yn, s) in scratch.iter_mut().enumerate() {
                    *s = self.transitions.at2(y, yn) + emissions[t + 1][yn] + beta[t + 1][yn];
                }
                beta[t][y] = log_sum_exp(&scratch);
            }
        }
        for (y, s) in scratch.iter_mut().enumerate() {
            *s = alpha[t_len - 1][y] + self.end.data()[y];
        }
        let log_z = log_sum_exp(&scratch);

        let mut demissions = vec![vec![0.0; k]; t_len];
        for t in 0..t_len {
            for y in 0..k {
                let marginal = (alpha[t][y] + beta[t][y] - log_z).exp();
                demissions[t][y] = marginal - if gold[t] == y { 1.0 } else { 0.0 };
            }
        }
        for y in 0..k {
            let start_marginal = (self.start.data()[y] + emissions[0][y] + beta[0][y] - log_z).exp();
            self.gstart.data_mut()[y] += start_marginal - if gold[0] == y { 1.0 } else { 0.0 };
            let end_marginal = (alpha[t_len - 1][y] + self.end.data()[y] - log_z).exp();
            self.gend.data_mut()[y] += end_marginal - if gold[t_len - 1] == y { 1.0 } else { 0.0 };
        }
        for t in 0..t_len - 1 {
            for a in 0..k {
                for b in 0..k {
                    let pair = (alpha[t][a]
                        + self.transitions.at2(a, b)
                        + emissions[t + 1][b]
                        + beta[t + 1][b]
                        - log_z)
                        .exp();
                    let gold_pair = if gold[t] == a && gold[t + 1] == b { 1.0 } else { 0.0 };
                    self.gtransitions.add2(a, b, pair - gold_pair);
                }
            }
        }

        let loss = log_z - self.path_score(emissions, gold);
        Ok((loss, demissions))
    }
}

impl ParamVisit for CrfParams {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, &mut Tensor)) {
        f(&join_name(prefix, "transitions"), &mut self.transitions, &mut self.gtransitions);
        f(&join_name(prefix, "start"), &mut self.start, &mut self.gstart);
        f(&join_name(prefix, "end"), &mut self.end, &mut self.gend);
    }
}

/// Exhaustive enumeration over all tag paths: the test oracle for both the
/// forward algorithm and Viterbi. Exponential, only usable for tiny T/K.
pub fn brute_force_paths(tags: usize, t_len: usize) -> Vec<Vec<usize>> {
    let mut paths: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..t_len {
        let mut next = Vec::with_capacity(paths.len() * tags);
        for p in &paths {
            for y in 0..tags {
                let mut q = p.clone();
                q.push(y);
                next.push(q);
            }
        }
        paths = next;
    }
    paths
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_instance(
        rng: &mut ChaCha20Rng,
        t_len: usize,
        tags: usize,
    ) -> (CrfParams, Vec<Vec<f64>>) {
        let mut crf = CrfParams::new(tags);
        for v in crf.transitions.data_mut() {
            *v = rng.random_range(-1.5..1.5);
        }
        for v in crf.start.data_mut() {
            *v = rng.random_range(-1.5..1.5);
        }
        for v in crf.end.data_mut() {
            *v = rng.random_range(-1.5..1.5);
        }
        let emissions = (0..t_len)
            .map(|_| (0..tags).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        (crf, emissions)
    }

    #[test]
    fn single_step_partition_closed_form() {
        let crf = CrfParams::new(2);
        let emissions = vec![vec![0.4, -1.1]];
        let expected = (0.4f64.exp() + (-1.1f64).exp()).ln();
        assert!((crf.log_partition(&emissions).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_params_give_t_log_tags() {
        let crf = CrfParams::new(3);
        let emissions = vec![vec![0.0; 3]; 2];
        let expected = 2.0 * 3.0f64.ln();
        assert!((crf.log_partition(&emissions).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn partition_matches_brute_force() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let (crf, emissions) = random_instance(&mut rng, 3, 4);
        let scores: Vec<f64> = brute_force_paths(4, 3)
            .iter()
            .map(|p| crf.path_score(&emissions, p))
            .collect();
        let brute = log_sum_exp(&scores);
        assert!((crf.log_partition(&emissions).unwrap() - brute).abs() <= 1e-9);
    }

    #[test]
    fn viterbi_peaked_emissions_zero_transitions() {
        let crf = CrfParams::new(3);
        let emissions = vec![vec![0.0, 5.0, 0.0], vec![9.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]];
        let (path, score) = crf.viterbi(&emissions).unwrap();
        assert_eq!(path, vec![1, 0, 2]);
        assert!((score - 16.0).abs() < 1e-12);
    }

    #[test]
    fn viterbi_matches_brute_force_argmax() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        for _ in 0..40 {
            let t_len = rng.random_range(1..=5);
            let tags = rng.random_range(2..=4);
            let (crf, emissions) = random_instance(&mut rng, t_len, tags);
            let mut best_score = f64::NEG_INFINITY;
            let mut best_path = Vec::new();
            for p in brute_force_paths(tags, t_len) {
                let s = crf.path_score(&emissions, &p);
                if s > best_score {
                    best_score = s;
                    best_path = p;
                }
            }
            let (path, score) = crf.viterbi(&emissions).unwrap();
            assert!((score - best_score).abs() < 1e-9);
            assert_eq!(path, best_path);
        }
    }

    #[test]
    fn forbidden_transition_never_decoded() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (mut crf, emissions) = random_instance(&mut rng, 4, 3);
            // Forbid 0 -> 1.
            crf.transitions.row_mut(0)[1] = -1e9;
            let (path, _) = crf.viterbi(&emissions).unwrap();
            for w in path.windows(2) {
                assert!(!(w[0] == 0 && w[1] == 1));
            }
        }
    }

    #[test]
    fn nll_degenerate_single_tag_is_zero() {
        let mut crf = CrfParams::new(1);
        let emissions = vec![vec![0.9], vec![-0.3]];
        let (loss, _) = crf.nll_and_grad(&emissions, &[0, 0]).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn nll_is_nonnegative() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for _ in 0..30 {
            let t_len = rng.random_range(1..=5);
            let tags = rng.random_range(2..=4);
            let (mut crf, emissions) = random_instance(&mut rng, t_len, tags);
            let gold: Vec<usize> = (0..t_len).map(|_| rng.random_range(0..tags)).collect();
            let (loss, _) = crf.nll_and_grad(&emissions, &gold).unwrap();
            assert!(loss >= -1e-12);
        }
    }

    #[test]
    fn partition_dominates_sampled_paths() {
        let mut rng = ChaCha20Rng::seed_from_u64(37);
        let (crf, emissions) = random_instance(&mut rng, 5, 4);
        let log_z = crf.log_partition(&emissions).unwrap();
        for _ in 0..50 {
            let p: Vec<usize> = (0..5).map(|_| rng.random_range(0..4)).collect();
            assert!(log_z >= crf.path_score(&emissions, &p));
        }
    }
}
