//! Inception scoring: fit a classifier for the binary target variable on
//! synthetic rows, then compare its scores on held-out synthetic rows with
//! its scores on real test rows.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{train_test_split, Schema};
use crate::error::{Error, Result};
use crate::nn::{argmax, Tensor};
use crate::validate::classify::{train_classifier, ClassifierConfig, ClassifierKind};
use crate::validate::metrics::ConfusionMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InceptionConfig {
    /// Share of the synthetic rows held out as the synthetic test-bed.
    pub synthetic_test_fraction: f64,
    pub classifier: ClassifierConfig,
}

impl Default for InceptionConfig {
    fn default() -> Self {
        InceptionConfig {
            synthetic_test_fraction: 0.2,
            classifier: ClassifierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestBedScores {
    pub recall_class0: f64,
    pub recall_class1: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

impl TestBedScores {
    fn from_confusion(confusion: ConfusionMatrix) -> Self {
        TestBedScores {
            recall_class0: confusion.recall(0),
            recall_class1: confusion.recall(1),
            macro_f1: confusion.macro_f1(),
            confusion,
        }
    }
}

/// Gaps are `real - synthetic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InceptionRow {
    pub model: ClassifierKind,
    pub synthetic: TestBedScores,
    pub real: TestBedScores,
    pub gap_recall_class0: f64,
    pub gap_recall_class1: f64,
    pub gap_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InceptionReport {
    pub rows: Vec<InceptionRow>,
}

impl InceptionReport {
    pub fn row(&self, kind: ClassifierKind) -> Option<&InceptionRow> {
        self.rows.iter().find(|r| r.model == kind)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "model,test_bed,recall_class0,recall_class1,macro_f1,gap_recall_class0,gap_recall_class1,gap_macro_f1,tn,fp,fn,tp\n",
        );
        for r in &self.rows {
            for (bed, sc, gaps) in [
                ("synthetic", &r.synthetic, None),
                (
                    "real",
                    &r.real,
                    Some((r.gap_recall_class0, r.gap_recall_class1, r.gap_macro_f1)),
                ),
            ] {
                let c = &sc.confusion.counts;
                let g = gaps.map_or_else(|| ",,".to_string(), |(a, b, f)| format!("{a},{b},{f}"));
                let _ = writeln!(
                    s,
                    "{},{bed},{},{},{},{g},{},{},{},{}",
                    r.model.name(),
                    sc.recall_class0,
                    sc.recall_class1,
                    sc.macro_f1,
                    c[0][0],
                    c[0][1],
                    c[1][0],
                    c[1][1]
                );
            }
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<13} synthetic R0 {:.3} R1 {:.3} F1 {:.3} | real R0 {:.3} ({:+.3}) R1 {:.3} ({:+.3}) F1 {:.3} ({:+.3})",
                r.model.name(),
                r.synthetic.recall_class0,
                r.synthetic.recall_class1,
                r.synthetic.macro_f1,
                r.real.recall_class0,
                r.gap_recall_class0,
                r.real.recall_class1,
                r.gap_recall_class1,
                r.real.macro_f1,
                r.gap_macro_f1
            );
        }
        s
    }
}

/// Splits one-hot rows into classifier inputs (target columns removed) and
/// target labels.
pub fn target_split(schema: &Schema, features: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    if features.cols() != schema.width() {
        return Err(Error::Shape(format!(
            "rows have {} columns, schema width is {}",
            features.cols(),
            schema.width()
        )));
    }
    let t = schema.target_index();
    let card = schema.variables[t].cardinality();
    if card != 2 {
        return Err(Error::Schema(format!(
            "inception scoring needs a binary target, `{}` has {card} states",
            schema.target_variable
        )));
    }
    let off = schema.offsets()[t];
    let mut inputs = Vec::with_capacity(features.rows() * (features.cols() - card));
    let mut labels = Vec::with_capacity(features.rows());
    for row in features.iter_rows() {
        inputs.extend_from_slice(&row[..off]);
        inputs.extend_from_slice(&row[off + card..]);
        labels.push(argmax(&row[off..off + card]));
    }
    Ok((Tensor::matrix(features.rows(), features.cols() - card, inputs)?, labels))
}

pub fn inception_score(
    synthetic: &Tensor,
    real_test: &Tensor,
    schema: &Schema,
    kind: ClassifierKind,
    config: &InceptionConfig,
    seed: u64,
) -> Result<InceptionRow> {
    let split = train_test_split(synthetic.rows(), config.synthetic_test_fraction, seed)?;
    if split.test.is_empty() {
        return Err(Error::Data("synthetic test-bed is empty".into()));
    }
    if real_test.rows() == 0 {
        return Err(Error::Data("real test-bed is empty".into()));
    }
    let (sx, sy) = target_split(schema, synthetic)?;
    let (rx, ry) = target_split(schema, real_test)?;
    let train_x = sx.select_rows(&split.train);
    let train_y: Vec<usize> = split.train.iter().map(|&i| sy[i]).collect();
    let clf = train_classifier(kind, &train_x, &train_y, &config.classifier, seed)?;

    let test_x = sx.select_rows(&split.test);
    let test_y: Vec<usize> = split.test.iter().map(|&i| sy[i]).collect();
    let syn = TestBedScores::from_confusion(ConfusionMatrix::new(&test_y, &clf.predict(&test_x)?, 2)?);
    let real = TestBedScores::from_confusion(ConfusionMatrix::new(&ry, &clf.predict(&rx)?, 2)?);
    Ok(InceptionRow {
        model: kind,
        gap_recall_class0: real.recall_class0 - syn.recall_class0,
        gap_recall_class1: real.recall_class1 - syn.recall_class1,
        gap_macro_f1: real.macro_f1 - syn.macro_f1,
        synthetic: syn,
        real,
    })
}

/// One row per classifier kind, in the order given.
pub fn inception_report(
    synthetic: &Tensor,
    real_test: &Tensor,
    schema: &Schema,
    kinds: &[ClassifierKind],
    config: &InceptionConfig,
    seed: u64,
) -> Result<InceptionReport> {
    let rows = kinds
        .iter()
        .map(|&k| inception_score(synthetic, real_test, schema, k, config, seed))
        .collect::<Result<_>>()?;
    Ok(InceptionReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode_states, Variable};

    fn schema() -> Schema {
        Schema::new(
            vec![
                Variable::new("municipality", &["0", "1"]),
                Variable::new("sector", &["a", "b"]),
                Variable::new("number of bidders", &["1", "2"]),
            ],
            "municipality",
        )
        .unwrap()
    }

    #[test]
    fn target_columns_are_removed() {
        let s = schema();
        let rows = Tensor::matrix(1, 6, encode_states(&s, &[1, 0, 1])).unwrap();
        let (x, y) = target_split(&s, &rows).unwrap();
        assert_eq!(x.data(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(y, vec![1]);
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let s = schema();
        let mut d = Vec::new();
        for i in 0..100 {
            let m = i % 2;
            d.extend(encode_states(&s, &[m, m, i % 3 % 2]));
        }
        let rows = Tensor::matrix(100, 6, d).unwrap();
        let row = inception_score(
            &rows,
            &rows,
            &s,
            ClassifierKind::DecisionTree,
            &InceptionConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!((row.synthetic.recall_class0, row.synthetic.recall_class1), (1.0, 1.0));
        assert_eq!(row.gap_macro_f1, 0.0);
    }
}
