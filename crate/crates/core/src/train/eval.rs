use serde::{Deserialize, Serialize};

/// Classification summary over a labelled split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub top1: f64,
    /// Accuracy per true class; `NaN` for classes without samples.
    pub per_class: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub samples: usize,
    /// Mean cross-entropy, when logits were available.
    pub loss: Option<f64>,
}

impl EvalReport {
    pub fn from_predictions(predictions: &[usize], labels: &[usize], classes: usize) -> Self {
        assert_eq!(predictions.len(), labels.len());
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&p, &l) in predictions.iter().zip(labels) {
            confusion[l][p] += 1;
        }
        let samples = labels.len();
        let correct: usize = (0..classes).map(|k| confusion[k][k]).sum();
        let per_class = confusion
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let n: usize = row.iter().sum();
                if n == 0 { f64::NAN } else { row[k] as f64 / n as f64 }
            })
            .collect();
        Self {
            top1: if samples == 0 { 0.0 } else { correct as f64 / samples as f64 },
            per_class,
            confusion,
            samples,
            loss: None,
        }
    }
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 2, 3, 0, 1, 2, 3];
        let r = EvalReport::from_predictions(&labels, &labels, 4);
        assert_eq!(r.top1, 1.0);
        for k in 0..4 {
            for j in 0..4 {
                assert_eq!(r.confusion[k][j], if k == j { 2 } else { 0 });
            }
        }
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let labels: Vec<usize> = (0..32).map(|i| i % 4).collect();
        let r = EvalReport::from_predictions(&[2; 32], &labels, 4);
        assert_eq!(r.top1, 0.25);
        assert_eq!(r.per_class, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn mean_std_known_values() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }

    proptest! {
        #[test]
        fn confusion_rows_and_trace(pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..60)) {
            let (pred, lab): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let r = EvalReport::from_predictions(&pred, &lab, 5);
            for k in 0..5 {
                let count = lab.iter().filter(|&&l| l == k).count();
                prop_assert_eq!(r.confusion[k].iter().sum::<usize>(), count);
            }
            let trace: usize = (0..5).map(|k| r.confusion[k][k]).sum();
            prop_assert_eq!(r.top1, trace as f64 / lab.len() as f64);
        }
    }
}
