//! Identification and spoofing rates.

use crate::dataset::DeviceClass;
use crate::{Error, Result};

/// N×N confusion matrix, `per_class[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    per_class: Vec<Vec<u64>>,
    correct: u64,
    total: u64,
}

impl ConfusionCounts {
    pub fn new(n_classes: usize) -> Self {
        ConfusionCounts { per_class: vec![vec![0; n_classes]; n_classes], correct: 0, total: 0 }
    }

    pub fn from_matrix(per_class: Vec<Vec<u64>>) -> Result<Self> {
        let n = per_class.len();
        if per_class.iter().any(|r| r.len() != n) {
            return Err(Error::Validation("confusion matrix must be square".into()));
        }
        let correct = (0..n).map(|i| per_class[i][i]).sum();
        let total = per_class.iter().flatten().sum();
        Ok(ConfusionCounts { per_class, correct, total })
    }

    /// Tallies paired truth/prediction lists.
    pub fn tally(n_classes: usize, truth: &[DeviceClass], predicted: &[DeviceClass]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Validation("truth and prediction lists differ in length".into()));
        }
        let mut c = ConfusionCounts::new(n_classes);
        for (t, p) in truth.iter().zip(predicted) {
            c.record(*t, *p)?;
        }
        Ok(c)
    }

    pub fn record(&mut self, truth: DeviceClass, predicted: DeviceClass) -> Result<()> {
        let n = self.per_class.len();
        if truth.0 >= n || predicted.0 >= n {
            return Err(Error::Validation(format!("class id outside 0..{n}")));
        }
        self.per_class[truth.0][predicted.0] += 1;
        self.total += 1;
        if truth == predicted {
            self.correct += 1;
        }
        Ok(())
    }

    pub fn correct(&self) -> u64 {
        self.correct
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn per_class(&self) -> &[Vec<u64>] {
        &self.per_class
    }
}

/// Correct identifications over total identifications.
pub fn identification_rate(counts: &ConfusionCounts) -> Result<f64> {
    if counts.total == 0 {
        return Err(Error::EmptyEvaluation("identification rate over zero identifications"));
    }
    Ok(counts.correct as f64 / counts.total as f64)
}

/// Fraction of predictions equal to the attacker's chosen class.
pub fn spoofing_rate(predictions: &[DeviceClass], target: DeviceClass) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyEvaluation("spoofing rate over zero predictions"));
    }
    let hits = predictions.iter().filter(|&&p| p == target).count();
    Ok(hits as f64 / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identification_rate_examples() {
        let mut m = vec![vec![0u64; 2]; 2];
        m[0][0] = 9762;
        m[0][1] = 238;
        let c = ConfusionCounts::from_matrix(m).unwrap();
        assert_eq!(identification_rate(&c).unwrap(), 0.9762);

        let c = ConfusionCounts::from_matrix(vec![vec![0, 100], vec![0, 0]]).unwrap();
        assert_eq!(identification_rate(&c).unwrap(), 0.0);

        let k = 7;
        let diag = (0..3).map(|i| (0..3).map(|j| if i == j { k } else { 0 }).collect()).collect();
        assert_eq!(identification_rate(&ConfusionCounts::from_matrix(diag).unwrap()).unwrap(), 1.0);

        assert!(matches!(identification_rate(&ConfusionCounts::new(3)), Err(Error::EmptyEvaluation(_))));
    }

    #[test]
    fn spoofing_rate_examples() {
        let mut preds = vec![DeviceClass(1); 9211];
        preds.extend(std::iter::repeat_n(DeviceClass(0), 789));
        assert_eq!(spoofing_rate(&preds, DeviceClass(1)).unwrap(), 0.9211);
        assert_eq!(spoofing_rate(&[DeviceClass(2); 5], DeviceClass(2)).unwrap(), 1.0);
        assert!(spoofing_rate(&[], DeviceClass(0)).is_err());
    }

    #[test]
    fn spoofing_rate_over_four_uniform_classes() {
        // Fixed prediction list: classes cycle through 0..4 with a seeded shuffle
        // of a 1000-element list; the exact count is recomputed by enumeration.
        use rand::seq::SliceRandom;
        let mut preds: Vec<DeviceClass> = (0..1000).map(|i| DeviceClass(i % 4)).collect();
        preds.shuffle(&mut crate::rng::rng_from(5));
        let expected = preds.iter().filter(|p| p.0 == 2).count() as f64 / 1000.0;
        let rate = spoofing_rate(&preds, DeviceClass(2)).unwrap();
        assert_eq!(rate, expected);
        assert!((rate - 0.25).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn rate_times_total_is_correct(matrix in proptest::collection::vec(proptest::collection::vec(0u64..50, 4), 4)) {
            let c = ConfusionCounts::from_matrix(matrix).unwrap();
            prop_assume!(c.total() > 0);
            let trace: u64 = (0..4).map(|i| c.per_class()[i][i]).sum();
            prop_assert_eq!(c.correct(), trace);
            prop_assert!(c.correct() <= c.total());
            let r = identification_rate(&c).unwrap();
            prop_assert_eq!((r * c.total() as f64).round() as u64, c.correct());
        }

        #[test]
        fn spoofing_rate_permutation_invariant(
            preds in proptest::collection::vec(0usize..5, 1..200),
            seed in any::<u64>(),
            target in 0usize..5,
        ) {
            use rand::seq::SliceRandom;
            let preds: Vec<DeviceClass> = preds.into_iter().map(DeviceClass).collect();
            let mut shuffled = preds.clone();
            shuffled.shuffle(&mut crate::rng::rng_from(seed));
            prop_assert_eq!(
                spoofing_rate(&preds, DeviceClass(target)).unwrap(),
                spoofing_rate(&shuffled, DeviceClass(target)).unwrap()
            );
        }
    }
}
