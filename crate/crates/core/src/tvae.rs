//! Tabular variational autoencoder.
//!
//! The encoder maps a row to the mean and log-variance of a diagonal Gaussian
//! posterior; the decoder maps a latent draw to one softmax block per discrete
//! variable and, optionally, one tanh output per continuous column. There is
//! no conditional vector anywhere in this model.
//!
//! Per-row loss: categorical cross-entropy summed over discrete variables,
//! plus `(x_j - tanh(x~_j))^2 / (2 sigma_j^2) + ln sigma_j` per continuous
//! column, plus the closed-form `KL(N(mu, sigma^2) || N(0, 1))`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{harden, EncodedDataset, Schema};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, forward, forward_graph, standard_normal, Activation, AdamConfig, AdamState, BoundParams, DenseLayer,
    Graph, HeadKind, HeadSpec, MlpSpec, ParameterSet, Tensor, Var,
};

/// Lower bound on the continuous-column spread parameters.
pub const SIGMA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TvaeConfig {
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TvaeConfig {
    fn default() -> Self {
        TvaeConfig {
            latent_dim: 16,
            encoder_hidden: vec![64, 64],
            decoder_hidden: vec![64, 64],
            epochs: 200,
            batch_size: 500,
            adam: AdamConfig::default(),
        }
    }
}

impl TvaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.adam.validate()
    }
}

/// Training table: one-hot discrete block plus optional continuous columns
/// (expected roughly in `[-1, 1]`, matching the tanh outputs).
#[derive(Debug, Clone)]
pub struct TvaeTable<'a> {
    pub cardinalities: &'a [usize],
    pub discrete: &'a Tensor,
    pub continuous: Option<&'a Tensor>,
}

impl TvaeTable<'_> {
    fn n_continuous(&self) -> usize {
        self.continuous.map_or(0, Tensor::cols)
    }

    fn validate(&self) -> Result<()> {
        let w: usize = self.cardinalities.iter().sum();
        if self.discrete.cols() != w {
            return Err(Error::Shape(format!(
                "discrete block has {} columns, cardinalities sum to {w}",
                self.discrete.cols()
            )));
        }
        if let Some(c) = self.continuous {
            if c.rows() != self.discrete.rows() {
                return Err(Error::Shape("continuous and discrete row counts differ".into()));
            }
        }
        if self.discrete.rows() == 0 {
            return Err(Error::Data("cannot train on an empty table".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub spec: MlpSpec,
    pub params: ParameterSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderModel {
    pub spec: MlpSpec,
    pub params: ParameterSet,
    /// Unconstrained `ln sigma_j`, one per continuous column (`1 x n`).
    pub log_sigma: Tensor,
    pub cardinalities: Vec<usize>,
}

impl DecoderModel {
    pub fn n_continuous(&self) -> usize {
        self.spec.heads.len() - self.cardinalities.len()
    }

    /// Effective `sigma_j` after the floor.
    pub fn sigmas(&self) -> Vec<f64> {
        self.log_sigma.data().iter().map(|l| l.exp().max(SIGMA_FLOOR)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvaeModel {
    pub config: TvaeConfig,
    pub schema: Option<Schema>,
    pub schema_fingerprint: Option<String>,
    pub encoder: EncoderModel,
    pub decoder: DecoderModel,
    pub epochs_trained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvaeEpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// `KL(N(mu, sigma^2) || N(0, 1))` for one latent dimension.
pub fn kl_standard_normal(mu: f64, sigma: f64) -> f64 {
    0.5 * (mu * mu + sigma * sigma - 1.0 - (sigma * sigma).ln())
}

fn encoder_spec(input: usize, config: &TvaeConfig) -> Result<MlpSpec> {
    let hidden: Vec<(usize, Activation)> = config.encoder_hidden.iter().map(|&d| (d, Activation::Relu)).collect();
    let head = HeadSpec {
        dim: config.latent_dim,
        kind: HeadKind::Linear,
    };
    MlpSpec::new(input, &hidden, vec![head, head])
}

fn decoder_spec(cards: &[usize], n_cont: usize, config: &TvaeConfig) -> Result<MlpSpec> {
    let hidden: Vec<(usize, Activation)> = config.decoder_hidden.iter().map(|&d| (d, Activation::Relu)).collect();
    let mut heads: Vec<HeadSpec> = cards
        .iter()
        .map(|&dim| HeadSpec {
            dim,
            kind: HeadKind::Softmax,
        })
        .collect();
    heads.extend((0..n_cont).map(|_| HeadSpec {
        dim: 1,
        kind: HeadKind::Tanh,
    }));
    MlpSpec::new(config.latent_dim, &hidden, heads)
}

/// Loss pieces as graph nodes.
struct LossNodes {
    total: Var,
    reconstruction: Var,
    kl: Var,
}

/// Records the batch loss for given reparameterization noise `eps`.
fn loss_graph(
    g: &mut Graph,
    encoder: (&MlpSpec, &BoundParams),
    decoder: (&MlpSpec, &BoundParams, Var),
    cards: &[usize],
    discrete: &Tensor,
    continuous: Option<&Tensor>,
    eps: &Tensor,
) -> Result<LossNodes> {
    let b = discrete.rows();
    let input = match continuous {
        Some(c) => Tensor::concat_cols(&[discrete, c])?,
        None => discrete.clone(),
    };
    let x = g.constant(input);
    let enc = forward_graph(g, encoder.0, encoder.1, x, None)?;
    let (mu, logvar) = (enc.outputs[0], enc.outputs[1]);

    // z = mu + exp(logvar / 2) * eps
    let half = g.scale(logvar, 0.5);
    let sigma = g.exp(half);
    let ev = g.constant(eps.clone());
    let noise = g.mul(sigma, ev)?;
    let z = g.add(mu, noise)?;

    let dec = forward_graph(g, decoder.0, decoder.1, z, None)?;

    // discrete cross-entropy against the true one-hot block
    let log_probs: Vec<Var> = dec.logits[..cards.len()].iter().map(|&l| g.log_softmax(l)).collect();
    let all = g.concat_cols(&log_probs)?;
    let target = g.constant(discrete.clone());
    let picked = g.mul(all, target)?;
    let ce_sum = g.sum(picked);
    let mut recon = g.scale(ce_sum, -1.0 / b as f64);

    if let Some(c) = continuous {
        let outs = &dec.outputs[cards.len()..];
        let pred = g.concat_cols(outs)?;
        let truth = g.constant(c.clone());
        let diff = g.sub(truth, pred)?;
        let sq = g.square(diff);
        let log_sigma = g.clamp_min(decoder.2, SIGMA_FLOOR.ln());
        let neg2 = g.scale(log_sigma, -2.0);
        let inv_var = g.exp(neg2);
        let weighted = g.mul_row(sq, inv_var)?;
        let s = g.sum(weighted);
        let quad = g.scale(s, 0.5 / b as f64);
        let norm = g.sum(log_sigma);
        let cont = g.add(quad, norm)?;
        recon = g.add(recon, cont)?;
    }

    // KL = 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar), averaged over rows
    let mu2 = g.square(mu);
    let var = g.exp(logvar);
    let a = g.add(mu2, var)?;
    let a = g.sub(a, logvar)?;
    let a = g.add_scalar(a, -1.0);
    let s = g.sum(a);
    let kl = g.scale(s, 0.5 / b as f64);

    let total = g.add(recon, kl)?;
    Ok(LossNodes {
        total,
        reconstruction: recon,
        kl,
    })
}

/// Trains on a mixed table. Deterministic per seed.
pub fn train_tvae_table(table: &TvaeTable, config: &TvaeConfig, seed: u64) -> Result<(TvaeModel, Vec<TvaeEpochLog>)> {
    config.validate()?;
    table.validate()?;
    let cards = table.cardinalities.to_vec();
    let n_cont = table.n_continuous();
    let input_dim = table.discrete.cols() + n_cont;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let enc_spec = encoder_spec(input_dim, config)?;
    let dec_spec = decoder_spec(&cards, n_cont, config)?;
    let mut encoder = EncoderModel {
        params: ParameterSet::init(&enc_spec, &mut rng),
        spec: enc_spec,
    };
    let mut decoder = DecoderModel {
        params: ParameterSet::init(&dec_spec, &mut rng),
        spec: dec_spec,
        log_sigma: Tensor::zeros(1, n_cont),
        cardinalities: cards.clone(),
    };

    // Encoder, decoder and the sigma row share one Adam state; the sigma row
    // rides along as an extra bias-only layer.
    let pack = |e: &ParameterSet, d: &ParameterSet, ls: &Tensor| ParameterSet {
        layers: e
            .layers
            .iter()
            .chain(&d.layers)
            .cloned()
            .chain(std::iter::once(DenseLayer {
                weight: Tensor::zeros(0, 0),
                bias: ls.clone(),
            }))
            .collect(),
    };
    let mut adam = AdamState::new(&pack(&encoder.params, &decoder.params, &decoder.log_sigma), config.adam)?;

    let n = table.discrete.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut tot, mut rec, mut kl, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let disc = table.discrete.select_rows(chunk);
            let cont = table.continuous.map(|c| c.select_rows(chunk));
            let eps = standard_normal(chunk.len(), config.latent_dim, &mut rng);

            let mut g = Graph::new();
            let ep = BoundParams::trainable(&mut g, &encoder.params);
            let dp = BoundParams::trainable(&mut g, &decoder.params);
            let ls = g.param(decoder.log_sigma.clone());
            let nodes = loss_graph(
                &mut g,
                (&encoder.spec, &ep),
                (&decoder.spec, &dp, ls),
                &cards,
                &disc,
                cont.as_ref(),
                &eps,
            )?;
            let value = g.value(nodes.total).data()[0];
            if !value.is_finite() {
                return Err(Error::Numerical(format!("TVAE loss is {value} at epoch {epoch}")));
            }
            let grads = g.backward(nodes.total)?;
            let eg = ep.gradients(&g, &grads);
            let dg = dp.gradients(&g, &grads);
            let lg = grads.get(&g, ls);
            let mut all = pack(&encoder.params, &decoder.params, &decoder.log_sigma);
            adam_step(&mut all, &pack(&eg, &dg, &lg), &mut adam)?;
            let ne = encoder.params.layers.len();
            let nd = decoder.params.layers.len();
            let mut layers = all.layers.into_iter();
            encoder.params.layers = layers.by_ref().take(ne).collect();
            decoder.params.layers = layers.by_ref().take(nd).collect();
            decoder.log_sigma = layers.next().expect("sigma layer").bias;

            tot += value;
            rec += g.value(nodes.reconstruction).data()[0];
            kl += g.value(nodes.kl).data()[0];
            batches += 1;
        }
        let nb = batches as f64;
        log.push(TvaeEpochLog {
            epoch,
            loss: tot / nb,
            reconstruction: rec / nb,
            kl: kl / nb,
        });
    }

    Ok((
        TvaeModel {
            config: config.clone(),
            schema: None,
            schema_fingerprint: None,
            encoder,
            decoder,
            epochs_trained: config.epochs,
        },
        log,
    ))
}

/// Trains on the one-hot features of an auction dataset.
pub fn train_tvae(dataset: &EncodedDataset, config: &TvaeConfig, seed: u64) -> Result<(TvaeModel, Vec<TvaeEpochLog>)> {
    let cards = dataset.schema.cardinalities();
    let table = TvaeTable {
        cardinalities: &cards,
        discrete: &dataset.features,
        continuous: None,
    };
    let (mut model, log) = train_tvae_table(&table, config, seed)?;
    model.schema = Some(dataset.schema.clone());
    model.schema_fingerprint = Some(dataset.schema.fingerprint());
    Ok((model, log))
}

/// Batch loss for fixed reparameterization noise, as a plain number.
pub fn tvae_loss(model: &TvaeModel, table: &TvaeTable, eps: &Tensor) -> Result<f64> {
    let mut g = Graph::new();
    let ep = BoundParams::frozen(&mut g, &model.encoder.params);
    let dp = BoundParams::frozen(&mut g, &model.decoder.params);
    let ls = g.constant(model.decoder.log_sigma.clone());
    let nodes = loss_graph(
        &mut g,
        (&model.encoder.spec, &ep),
        (&model.decoder.spec, &dp, ls),
        table.cardinalities,
        table.discrete,
        table.continuous,
        eps,
    )?;
    Ok(g.value(nodes.total).data()[0])
}

/// Gradient of [`tvae_loss`] with respect to the encoder parameters.
pub fn tvae_encoder_gradient(model: &TvaeModel, table: &TvaeTable, eps: &Tensor) -> Result<ParameterSet> {
    let mut g = Graph::new();
    let ep = BoundParams::trainable(&mut g, &model.encoder.params);
    let dp = BoundParams::frozen(&mut g, &model.decoder.params);
    let ls = g.constant(model.decoder.log_sigma.clone());
    let nodes = loss_graph(
        &mut g,
        (&model.encoder.spec, &ep),
        (&model.decoder.spec, &dp, ls),
        table.cardinalities,
        table.discrete,
        table.continuous,
        eps,
    )?;
    let grads = g.backward(nodes.total)?;
    Ok(ep.gradients(&g, &grads))
}

/// Decoded rows from the standard-normal prior: the hardened one-hot block,
/// followed by `tanh` outputs for any continuous columns.
pub fn sample_table<R: Rng + ?Sized>(model: &TvaeModel, n: usize, rng: &mut R) -> Result<(Tensor, Tensor)> {
    if model.epochs_trained == 0 {
        return Err(Error::NotTrained);
    }
    let dec = &model.decoder;
    let w: usize = dec.cardinalities.iter().sum();
    let n_cont = dec.n_continuous();
    if n == 0 {
        return Ok((Tensor::zeros(0, w), Tensor::zeros(0, n_cont)));
    }
    let z = standard_normal(n, model.config.latent_dim, rng);
    let heads = forward(&dec.spec, &dec.params, &z, None)?;
    let (disc, cont) = heads.split_at(dec.cardinalities.len());
    let disc_refs: Vec<&Tensor> = disc.iter().collect();
    let soft = Tensor::concat_cols(&disc_refs)?;
    let mut hard = Vec::with_capacity(soft.len());
    let offsets: Vec<usize> = dec
        .cardinalities
        .iter()
        .scan(0, |acc, &k| {
            let o = *acc;
            *acc += k;
            Some(o)
        })
        .collect();
    for row in soft.iter_rows() {
        let mut h = vec![0.0; w];
        for (&o, &k) in offsets.iter().zip(&dec.cardinalities) {
            h[o + crate::nn::argmax(&row[o..o + k])] = 1.0;
        }
        hard.extend(h);
    }
    let cont_refs: Vec<&Tensor> = cont.iter().collect();
    let cont = if cont_refs.is_empty() {
        Tensor::zeros(n, 0)
    } else {
        Tensor::concat_cols(&cont_refs)?
    };
    Ok((Tensor::matrix(n, w, hard)?, cont))
}

/// `n` hardened one-hot feature rows decoded from `z ~ N(0, I)`.
pub fn sample_features_tvae<R: Rng + ?Sized>(model: &TvaeModel, n: usize, rng: &mut R) -> Result<Tensor> {
    let schema = model
        .schema
        .as_ref()
        .ok_or_else(|| Error::Config("TVAE model carries no schema".into()))?;
    let (rows, _) = sample_table(model, n, rng)?;
    debug_assert_eq!(rows, harden(schema, &rows));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::open_uniform;

    #[test]
    fn kl_closed_form_cases() {
        assert_eq!(kl_standard_normal(0.0, 1.0), 0.0);
        assert!((kl_standard_normal(1.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        // E_q[ln q(z) - ln p(z)] estimated from 200k draws; compare within 3 sd.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mu: f64 = rng.random_range(-1.5..1.5);
            let sigma: f64 = rng.random_range(0.3..2.0);
            let n = 200_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| {
                    let e: f64 = rng.sample(rand_distr::StandardNormal);
                    let z = mu + sigma * e;
                    (-0.5 * e * e - sigma.ln()) - (-0.5 * z * z)
                })
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            let exact = kl_standard_normal(mu, sigma);
            assert!((mean - exact).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {exact}");
        }
    }

    fn table_data(rng: &mut ChaCha8Rng) -> (Vec<usize>, Tensor, Tensor) {
        let cards = vec![2, 3];
        let n = 6;
        let mut d = Vec::new();
        for i in 0..n {
            let mut r = vec![0.0; 5];
            r[i % 2] = 1.0;
            r[2 + i % 3] = 1.0;
            d.extend(r);
        }
        let cont = open_uniform(n, 1, rng).map(|u| 2.0 * u - 1.0);
        (cards, Tensor::matrix(n, 5, d).unwrap(), cont)
    }

    #[test]
    fn encoder_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (cards, disc, cont) = table_data(&mut rng);
        let table = TvaeTable {
            cardinalities: &cards,
            discrete: &disc,
            continuous: Some(&cont),
        };
        let cfg = TvaeConfig {
            latent_dim: 2,
            encoder_hidden: vec![4],
            decoder_hidden: vec![4],
            epochs: 1,
            batch_size: 6,
            ..TvaeConfig::default()
        };
        let (mut model, _) = train_tvae_table(&table, &cfg, 1).unwrap();
        model.decoder.log_sigma = Tensor::row(vec![-0.3]);
        let eps = standard_normal(6, 2, &mut rng);
        let analytic = tvae_encoder_gradient(&model, &table, &eps).unwrap();
        let h = 1e-5;
        for li in 0..model.encoder.params.layers.len() {
            for part in 0..2 {
                let len = if part == 0 {
                    model.encoder.params.layers[li].weight.len()
                } else {
                    model.encoder.params.layers[li].bias.len()
                };
                for i in 0..len {
                    let eval = |delta: f64| {
                        let mut m = model.clone();
                        let l = &mut m.encoder.params.layers[li];
                        let t = if part == 0 { &mut l.weight } else { &mut l.bias };
                        t.data_mut()[i] += delta;
                        tvae_loss(&m, &table, &eps).unwrap()
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let l = &analytic.layers[li];
                    let an = if part == 0 {
                        l.weight.data()[i]
                    } else {
                        l.bias.data()[i]
                    };
                    assert!(
                        (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3),
                        "layer {li} part {part} [{i}]: fd {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (cards, disc, _) = table_data(&mut rng);
        let table = TvaeTable {
            cardinalities: &cards,
            discrete: &disc,
            continuous: None,
        };
        let cfg = TvaeConfig {
            epochs: 2,
            batch_size: 3,
            ..TvaeConfig::default()
        };
        let (mut model, log) = train_tvae_table(&table, &cfg, 4).unwrap();
        assert_eq!(log.len(), 2);
        let (rows, cont) = sample_table(&model, 0, &mut rng).unwrap();
        assert_eq!((rows.rows(), cont.cols()), (0, 0));
        let (rows, _) = sample_table(&model, 25, &mut rng).unwrap();
        for r in rows.iter_rows() {
            assert_eq!(r[0] + r[1], 1.0);
            assert_eq!(r[2] + r[3] + r[4], 1.0);
        }
        model.epochs_trained = 0;
        assert!(matches!(sample_table(&model, 1, &mut rng), Err(Error::NotTrained)));
    }

    #[test]
    fn perfect_reconstruction_has_zero_cross_entropy() {
        // decoder whose softmax heads put all mass on the true states
        let cards = [2usize];
        let disc = Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap();
        let logits = Tensor::matrix(1, 2, vec![-800.0, 800.0]).unwrap();
        let lp = crate::nn::graph::log_softmax_rows(&logits);
        let ce: f64 = -lp.data().iter().zip(disc.data()).map(|(l, t)| l * t).sum::<f64>();
        assert_eq!(ce, 0.0);
        assert_eq!(cards.iter().sum::<usize>(), disc.cols());
    }
}
