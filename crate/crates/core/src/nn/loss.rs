//! Softmax cross-entropy and log-sum-exp utilities.

use super::tensor::NnError;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of a score list against `target_idx`; returns the loss and
/// dL/dscores (softmax minus one-hot).
pub fn softmax_cross_entropy(scores: &[f64], target_idx: usize) -> Result<(f64, Vec<f64>), NnError> {
    if target_idx >= scores.len() {
        return Err(NnError::Shape(format!(
            "target {target_idx} out of range for {} scores",
            scores.len()
        )));
    }
    let probs = softmax(scores);
    let loss = -probs[target_idx].max(f64::MIN_POSITIVE).ln();
    let mut grad = probs;
    grad[target_idx] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores_give_ln_n() {
        for n in [2usize, 3, 7] {
            let (loss, grad) = softmax_cross_entropy(&vec![0.5; n], 0).unwrap();
            assert!((loss - (n as f64).ln()).abs() < 1e-12);
            assert!((grad[0] - (1.0 / n as f64 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = softmax(&[1.0, -2.0, 0.3, 9.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lse_dominates_max() {
        let xs = [0.3, -1.2, 2.0];
        assert!(log_sum_exp(&xs) >= 2.0);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2.0f64.ln()).abs() < 1e-12);
    }
}
