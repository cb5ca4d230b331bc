//! Small deterministic neural-network engine: tensors, a reverse-mode tape,
//! dense multi-head networks and Adam.

pub mod adam;
pub mod graph;
pub mod mlp;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use graph::{Gradients, Graph, Var};
pub use mlp::{
    forward, forward_graph, gumbel_softmax, input_gradient_graph, input_gradient_norm, input_gradient_norm_graph,
    Activation, BoundParams, DenseLayer, HeadKind, HeadSpec, HeadVars, HiddenSpec, MlpSpec, ParameterSet,
};
pub use tensor::{argmax, Tensor};

use rand::Rng;
use rand_distr::StandardNormal;

/// `rows x cols` of i.i.d. standard normal draws.
pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::from_parts(rows, cols, data)
}

/// `rows x cols` of uniform draws strictly inside (0, 1).
pub fn open_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        })
        .collect();
    Tensor::from_parts(rows, cols, data)
}
