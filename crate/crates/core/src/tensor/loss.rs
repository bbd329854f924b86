use super::{Real, TensorError};

/// Numerically stable softmax (max subtracted before exponentiating).
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Returns `-log softmax(logits)[class]` and its gradient `softmax - onehot`.
pub fn softmax_cross_entropy<T: Real>(logits: &[T], class: usize) -> Result<(T, Vec<T>), TensorError> {
    if class >= logits.len() {
        return Err(TensorError::ClassOutOfRange { class, classes: logits.len() });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let log_total = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    let loss = log_total - (logits[class] - max);
    let mut grad = softmax(logits);
    grad[class] -= T::one();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    #[allow(clippy::approx_constant)] // the printed value is the oracle
    fn uniform_logits() {
        for class in 0..10 {
            let (loss, grad) = softmax_cross_entropy(&[0.0f64; 10], class).unwrap();
            assert!((loss - 10f64.ln()).abs() < 1e-15);
            assert!((loss - 2.302585).abs() < 1e-6);
            assert!((grad[class] + 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_logits() {
        let mut logits = [0.0f64; 10];
        logits[3] = 1000.0;
        let (loss, _) = softmax_cross_entropy(&logits, 3).unwrap();
        assert!(loss.abs() < 1e-12);
        let (loss, _) = softmax_cross_entropy(&logits, 4).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn class_out_of_range() {
        assert_eq!(
            softmax_cross_entropy(&[0.0f32; 10], 10),
            Err(TensorError::ClassOutOfRange { class: 10, classes: 10 })
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let logits = [0.3f64, -1.2, 2.5, 0.0, -0.7];
        let class = 2;
        let (_, grad) = softmax_cross_entropy(&logits, class).unwrap();
        let h = 1e-5;
        for i in 0..logits.len() {
            let mut p = logits;
            p[i] += h;
            let fp = softmax_cross_entropy(&p, class).unwrap().0;
            p[i] -= 2.0 * h;
            let fm = softmax_cross_entropy(&p, class).unwrap().0;
            let numeric = (fp - fm) / (2.0 * h);
            let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs());
            assert!(rel < 1e-6, "logit {i}: {numeric} vs {}", grad[i]);
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..20)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|&v| v > 0.0));
        }

        #[test]
        fn f32_softmax_is_a_distribution(logits in prop::collection::vec(-20.0f32..20.0, 1..=10)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().map(|&v| f64::from(v)).sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|&v| v > 0.0));
        }
    }
}
