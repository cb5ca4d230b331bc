//! Conditional vectors and training-by-sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::encode::{pmf_of, EncodedDataset};
use crate::data::schema::Schema;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// A single `(variable, state)` selection over the full one-hot width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalVector {
    pub width: usize,
    pub variable: usize,
    pub state: usize,
    /// Column of the single 1 in the dense form.
    pub position: usize,
}

impl ConditionalVector {
    pub fn new(schema: &Schema, variable: usize, state: usize) -> Result<Self> {
        let v = schema
            .variables
            .get(variable)
            .ok_or_else(|| Error::Schema(format!("variable index {variable} out of range")))?;
        if state >= v.cardinality() {
            return Err(Error::Schema(format!(
                "state {state} out of range for {:?} (cardinality {})",
                v.name,
                v.cardinality()
            )));
        }
        Ok(ConditionalVector {
            width: schema.width(),
            variable,
            state,
            position: schema.offsets()[variable] + state,
        })
    }

    /// Parses `VAR=STATE`, where STATE is a category label or, failing that,
    /// a state index.
    pub fn parse(schema: &Schema, assignment: &str) -> Result<Self> {
        let (name, label) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected VAR=STATE, got {assignment:?}")))?;
        let variable = schema.index_of(name.trim())?;
        let v = &schema.variables[variable];
        let label = label.trim();
        let state = v
            .state_of(label)
            .or_else(|| label.parse().ok().filter(|&s| s < v.cardinality()))
            .ok_or_else(|| Error::Schema(format!("unknown state {label:?} for {:?}", v.name)))?;
        Self::new(schema, variable, state)
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.width];
        v[self.position] = 1.0;
        v
    }

    pub fn satisfied_by(&self, row: &[f64]) -> bool {
        row[self.position] == 1.0
    }
}

/// Stacks conditional vectors into a `n x width` matrix.
pub fn cond_matrix(conds: &[ConditionalVector], width: usize) -> Tensor {
    let mut data = vec![0.0; conds.len() * width];
    for (i, c) in conds.iter().enumerate() {
        data[i * width + c.position] = 1.0;
    }
    Tensor::from_parts(conds.len(), width, data)
}

/// Per-variable state distributions used to draw conditional vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondSampler {
    width: usize,
    offsets: Vec<usize>,
    /// Sampling weights per variable (normalized).
    weights: Vec<Vec<f64>>,
}

impl CondSampler {
    /// Empirical PMFs of `dataset`. With `log_frequency` the weights become
    /// `ln(1 + count)` renormalized.
    pub fn from_dataset(dataset: &EncodedDataset, log_frequency: bool) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Data(
                "cannot build a condition sampler from an empty dataset".into(),
            ));
        }
        let schema = &dataset.schema;
        let n = dataset.len() as f64;
        let weights = schema
            .variables
            .iter()
            .zip(schema.offsets())
            .map(|(v, off)| {
                let pmf = pmf_of(&dataset.features, off, v.cardinality())?;
                if log_frequency {
                    let w: Vec<f64> = pmf.iter().map(|p| (1.0 + p * n).ln()).collect();
                    let t: f64 = w.iter().sum();
                    Ok(w.into_iter().map(|x| x / t).collect())
                } else {
                    Ok(pmf)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CondSampler {
            width: schema.width(),
            offsets: schema.offsets(),
            weights,
        })
    }

    pub fn pmf(&self, variable: usize) -> &[f64] {
        &self.weights[variable]
    }

    /// Variable uniformly at random, then a state from that variable's PMF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ConditionalVector {
        let variable = rng.random_range(0..self.weights.len());
        let state = sample_index(&self.weights[variable], rng);
        ConditionalVector {
            width: self.width,
            variable,
            state,
            position: self.offsets[variable] + state,
        }
    }
}

/// Draws an index from normalized weights by inversion.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if u < acc && w > 0.0 {
            return i;
        }
    }
    last_positive
}

/// Draws a conditional vector: variable uniformly, state per empirical PMF.
pub fn sample_cond_vector<R: Rng + ?Sized>(dataset: &EncodedDataset, rng: &mut R) -> Result<ConditionalVector> {
    Ok(CondSampler::from_dataset(dataset, false)?.sample(rng))
}
