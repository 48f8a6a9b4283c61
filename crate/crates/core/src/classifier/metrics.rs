use super::ClassifierError;

/// F1 score treating `positive` as the class of interest:
/// `2TP / (2TP + FP + FN)`.
///
/// Returns 0 when there are no true positives, including the case where
/// neither predictions nor truth contain the class.
pub fn f1(preds: &[i8], truth: &[i8], positive: i8) -> Result<f64, ClassifierError> {
    if preds.len() != truth.len() {
        return Err(ClassifierError::LengthMismatch {
            left: preds.len(),
            right: truth.len(),
        });
    }
    if preds.is_empty() {
        return Err(ClassifierError::TooFewSamples {
            required: 1,
            found: 0,
        });
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &t) in preds.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok((2 * tp) as f64 / (2 * tp + fp + fn_) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(f1(&[1, -1, 1], &[1, -1, 1], 1).unwrap(), 1.0);
        // TP=2, FP=1, FN=1
        let preds = [1, 1, 1, -1, -1];
        let truth = [1, 1, -1, 1, -1];
        assert_eq!(f1(&preds, &truth, 1).unwrap(), 2.0 / 3.0);
        assert_eq!(f1(&[-1, -1], &[-1, -1], 1).unwrap(), 0.0);
        assert_eq!(f1(&[-1, -1], &[-1, -1], -1).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(f1(&[1], &[1, 1], 1), Err(ClassifierError::LengthMismatch { .. })));
        assert!(f1(&[], &[], 1).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((prop::bool::ANY, prop::bool::ANY), 1..30), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let label = |b: bool| if b { 1i8 } else { -1 };
            let preds: Vec<i8> = pairs.iter().map(|p| label(p.0)).collect();
            let truth: Vec<i8> = pairs.iter().map(|p| label(p.1)).collect();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let sp: Vec<i8> = shuffled.iter().map(|p| label(p.0)).collect();
            let st: Vec<i8> = shuffled.iter().map(|p| label(p.1)).collect();
            for positive in [1, -1] {
                let v = f1(&preds, &truth, positive).unwrap();
                prop_assert_eq!(v, f1(&sp, &st, positive).unwrap());
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
