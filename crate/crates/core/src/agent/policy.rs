use rand::Rng;

/// `exp(q_i - max q) / sum_j exp(q_j - max q)`.
pub fn softmax_probs(q: &[f64]) -> Vec<f64> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = q.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Samples an index from the softmax distribution over `q`.
///
/// # Panics
/// Panics on an empty slice.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], rng: &mut R) -> usize {
    assert!(!q.is_empty(), "select_action needs at least one candidate");
    let probs = softmax_probs(q);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_values() {
        assert_eq!(softmax_probs(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(softmax_probs(&[3.0]), vec![1.0]);
        let p = softmax_probs(&[1.0, 2.0]);
        assert!((p[0] - 0.268941).abs() < 1e-6);
        assert!((p[1] - 0.731059).abs() < 1e-6);
    }

    #[test]
    fn single_candidate_always_chosen() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_action(&[-4.0], &mut rng), 0);
        }
    }

    #[test]
    fn empirical_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let hits = (0..n).filter(|_| select_action(&[1.0, 2.0], &mut rng) == 1).count();
        assert!((hits as f64 / n as f64 - 0.731059).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn normalized_and_shift_invariant(
            q in proptest::collection::vec(-50.0f64..50.0, 1..12),
            c in -100.0f64..100.0,
        ) {
            let p = softmax_probs(&q);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
            let ps = softmax_probs(&shifted);
            for (a, b) in p.iter().zip(&ps) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
