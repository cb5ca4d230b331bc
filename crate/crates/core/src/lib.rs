//! Synthetic first-price sealed-bid auction data.
//!
//! The pipeline has two stages. A feature synthesizer (a conditional tabular
//! Wasserstein GAN, [`ctwgan`], or a tabular VAE, [`tvae`]) learns the joint
//! distribution of the discrete auction features. [`bidnet`] then maps a
//! feature row to the mean and variance of the standardized log bid, and
//! [`sampler`] draws one bid per bidder from that Gaussian. [`validate`] holds
//! the metrics used to judge the synthetic output.

pub mod bidnet;
pub mod ctwgan;
pub mod data;
pub mod error;
pub mod nn;
pub mod persist;
pub mod sampler;
pub mod tvae;
pub mod validate;

pub use error::{Error, Result};
