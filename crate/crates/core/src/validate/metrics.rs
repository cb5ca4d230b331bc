use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!(
                "{} labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut counts = vec![vec![0; n_classes]; n_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::Data(format!("label out of range for {n_classes} classes")));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    /// Recall of class `c`; 0 when the class never occurs.
    pub fn recall(&self, c: usize) -> f64 {
        let total: usize = self.counts[c].iter().sum();
        ratio(self.counts[c][c], total)
    }

    pub fn precision(&self, c: usize) -> f64 {
        let total: usize = self.counts.iter().map(|r| r[c]).sum();
        ratio(self.counts[c][c], total)
    }

    pub fn f1(&self, c: usize) -> f64 {
        let (p, r) = (self.precision(c), self.recall(c));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Unweighted mean of the per-class F1 scores.
    pub fn macro_f1(&self) -> f64 {
        let k = self.n_classes();
        (0..k).map(|c| self.f1(c)).sum::<f64>() / k as f64
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..self.n_classes()).map(|c| self.counts[c][c]).sum();
        let total: usize = self.counts.iter().flatten().sum();
        ratio(diag, total)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_scores() {
        // truth 0 0 0 1 1, predicted 0 0 1 1 0
        let m = ConfusionMatrix::new(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 0], 2).unwrap();
        assert_eq!(m.counts, vec![vec![2, 1], vec![1, 1]]);
        assert!((m.recall(0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall(1), 0.5);
        let f0 = 2.0 * (2.0 / 3.0) * (2.0 / 3.0) / (4.0 / 3.0);
        let f1 = 0.5;
        assert!((m.macro_f1() - (f0 + f1) / 2.0).abs() < 1e-15);
        assert_eq!(m.accuracy(), 0.6);
    }

    #[test]
    fn absent_class_scores_zero() {
        let m = ConfusionMatrix::new(&[0, 0], &[0, 0], 2).unwrap();
        assert_eq!(m.recall(1), 0.0);
        assert_eq!(m.f1(1), 0.0);
        assert_eq!(m.macro_f1(), 0.5);
    }
}
