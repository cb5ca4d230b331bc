//! Conditional tabular Wasserstein GAN with gradient penalty.
//!
//! Training follows the training-by-sampling scheme: every generated row is
//! tied to a conditional vector drawn by picking a variable uniformly and a
//! state from that variable's empirical PMF, the real row it is compared with
//! is drawn among rows exhibiting that state, and the generator pays a
//! cross-entropy penalty when its selected head disagrees with the condition.
//! The critic sees `pac` distinct samples per input row (PacGAN packing) and
//! is regularized by the interpolated-input gradient penalty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{cond_matrix, harden, CondSampler, ConditionalVector, EncodedDataset, Schema};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, forward, forward_graph, input_gradient_norm, input_gradient_norm_graph, open_uniform, standard_normal,
    Activation, AdamConfig, AdamState, BoundParams, Graph, HeadKind, HeadSpec, MlpSpec, ParameterSet, Tensor, Var,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub z_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub critic_leaky_slope: f64,
    /// Samples packed into one critic input.
    pub pac: usize,
    pub gp_lambda: f64,
    /// Generator is updated once every `k_sync` critic updates.
    pub k_sync: usize,
    /// Gumbel-softmax temperature of the generator heads.
    pub tau: f64,
    pub epochs: usize,
    /// Rows per batch; must be a multiple of `pac`.
    pub batch_size: usize,
    pub generator_adam: AdamConfig,
    pub critic_adam: AdamConfig,
    /// Draw condition states with `ln(1 + count)` weights instead of the raw PMF.
    pub log_frequency: bool,
}

impl Default for GanConfig {
    fn default() -> Self {
        // The critic learns ten times faster than the generator; with equal
        // rates the generator only matched the marginals on oracle data.
        let adam = |lr| AdamConfig {
            lr,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        };
        GanConfig {
            z_dim: 32,
            generator_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            critic_leaky_slope: 0.2,
            pac: 10,
            gp_lambda: 10.0,
            k_sync: 1,
            tau: 0.2,
            epochs: 200,
            batch_size: 100,
            generator_adam: adam(2e-4),
            critic_adam: adam(2e-3),
            log_frequency: false,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.pac == 0 {
            return fail("pac must be >= 1".into());
        }
        if self.batch_size == 0 || self.batch_size % self.pac != 0 {
            return fail(format!(
                "batch_size {} must be a positive multiple of pac {}",
                self.batch_size, self.pac
            ));
        }
        if !(self.gp_lambda >= 0.0) {
            return fail(format!("gp_lambda must be >= 0, got {}", self.gp_lambda));
        }
        if self.k_sync == 0 {
            return fail("k_sync must be >= 1".into());
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be > 0, got {}", self.tau));
        }
        if self.z_dim == 0 {
            return fail("z_dim must be >= 1".into());
        }
        self.generator_adam.validate()?;
        self.critic_adam.validate()
    }
}

/// Generator: `[z, cond] -> one gumbel-softmax head per schema variable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub spec: MlpSpec,
    pub params: ParameterSet,
}

/// Critic: `pac x [row, cond] -> scalar score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticModel {
    pub spec: MlpSpec,
    pub params: ParameterSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtwganModel {
    pub config: GanConfig,
    pub schema: Schema,
    pub schema_fingerprint: String,
    pub cond_sampler: CondSampler,
    pub generator: GeneratorModel,
    pub critic: CriticModel,
    pub epochs_trained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanEpochLog {
    pub epoch: usize,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub gradient_penalty: f64,
    pub cond_cross_entropy: f64,
    pub resampled_conditions: usize,
}

pub fn generator_spec(schema: &Schema, config: &GanConfig) -> Result<MlpSpec> {
    let hidden: Vec<(usize, Activation)> = config.generator_hidden.iter().map(|&d| (d, Activation::Relu)).collect();
    let heads = schema
        .cardinalities()
        .into_iter()
        .map(|dim| HeadSpec {
            dim,
            kind: HeadKind::GumbelSoftmax(config.tau),
        })
        .collect();
    MlpSpec::new(config.z_dim + schema.width(), &hidden, heads)
}

pub fn critic_spec(schema: &Schema, config: &GanConfig) -> Result<MlpSpec> {
    let hidden: Vec<(usize, Activation)> = config
        .critic_hidden
        .iter()
        .map(|&d| (d, Activation::LeakyRelu(config.critic_leaky_slope)))
        .collect();
    MlpSpec::new(
        config.pac * 2 * schema.width(),
        &hidden,
        vec![HeadSpec {
            dim: 1,
            kind: HeadKind::Linear,
        }],
    )
}

/// Packs `[rows | conds]` (`B x 2w`) into `B/pac x pac*2w`.
pub fn pack(rows: &Tensor, conds: &Tensor, pac: usize) -> Result<Tensor> {
    if rows.rows() % pac != 0 {
        return Err(Error::Shape(format!("{} rows not divisible by pac {pac}", rows.rows())));
    }
    let joined = Tensor::concat_cols(&[rows, conds])?;
    joined.reshape(rows.rows() / pac, pac * joined.cols())
}

/// Mean over packed rows of `(||grad_x C(x_hat)|| - 1)^2` on interpolates
/// `x_hat = eps * real + (1 - eps) * fake`, one `eps` per packed row.
fn gradient_penalty_node(
    g: &mut Graph,
    spec: &MlpSpec,
    critic: &BoundParams,
    real: &Tensor,
    fake: &Tensor,
    eps: &[f64],
) -> Result<Var> {
    if real.shape() != fake.shape() || eps.len() != real.rows() {
        return Err(Error::Shape(format!(
            "gradient penalty: real {:?}, fake {:?}, {} mixing weights",
            real.shape(),
            fake.shape(),
            eps.len()
        )));
    }
    let m = real.cols();
    let data = real
        .data()
        .iter()
        .zip(fake.data())
        .enumerate()
        .map(|(i, (r, f))| {
            let e = eps[i / m];
            e * r + (1.0 - e) * f
        })
        .collect();
    let interp = g.constant(Tensor::matrix(real.rows(), m, data)?);
    let norm = input_gradient_norm_graph(g, spec, critic, interp)?;
    let dev = g.add_scalar(norm, -1.0);
    let sq = g.square(dev);
    Ok(g.mean(sq))
}

/// Gradient penalty of `critic` on packed `real`/`fake` batches.
pub fn gradient_penalty<R: Rng + ?Sized>(
    critic: &CriticModel,
    real: &Tensor,
    fake: &Tensor,
    rng: &mut R,
) -> Result<f64> {
    let eps: Vec<f64> = (0..real.rows()).map(|_| rng.random()).collect();
    let mut g = Graph::new();
    let bound = BoundParams::frozen(&mut g, &critic.params);
    let gp = gradient_penalty_node(&mut g, &critic.spec, &bound, real, fake, &eps)?;
    Ok(g.value(gp).data()[0])
}

/// `lambda * (||grad critic(x_hat)|| - 1)^2` for each packed row, with fresh
/// interpolates `x_hat = eps * real + (1 - eps) * fake`.
pub fn gradient_penalty_rows<R: Rng + ?Sized>(
    critic: &CriticModel,
    real: &Tensor,
    fake: &Tensor,
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if real.shape() != fake.shape() {
        return Err(Error::Shape(format!(
            "gradient penalty: real {:?}, fake {:?}",
            real.shape(),
            fake.shape()
        )));
    }
    let m = real.cols();
    let mut data = Vec::with_capacity(real.len());
    for (r, f) in real.iter_rows().zip(fake.iter_rows()) {
        let e: f64 = rng.random();
        data.extend(r.iter().zip(f).map(|(a, b)| e * a + (1.0 - e) * b));
    }
    let interp = Tensor::matrix(real.rows(), m, data)?;
    let norms = input_gradient_norm(&critic.spec, &critic.params, &interp)?;
    Ok(norms.into_iter().map(|n| lambda * (n - 1.0).powi(2)).collect())
}

/// Mean critic score over packed rows.
pub fn critic_score(critic: &CriticModel, packed: &Tensor) -> Result<f64> {
    let out = forward(&critic.spec, &critic.params, packed, None)?;
    Ok(out[0].sum() / out[0].rows().max(1) as f64)
}

/// `mean(-ln p[selected state])` where `heads[k]` holds the probabilities of
/// variable `k` and each row has its own condition.
pub fn ce_condition_penalty(heads: &[Tensor], conds: &[ConditionalVector]) -> Result<f64> {
    if conds.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (row, c) in conds.iter().enumerate() {
        let head = heads
            .get(c.variable)
            .ok_or_else(|| Error::Shape(format!("no head for variable {}", c.variable)))?;
        if row >= head.rows() || c.state >= head.cols() {
            return Err(Error::Shape("condition outside head output".into()));
        }
        total -= head.get(row, c.state).ln();
    }
    Ok(total / conds.len() as f64)
}

struct Trainer<'a> {
    config: &'a GanConfig,
    data: &'a EncodedDataset,
    sampler: CondSampler,
    rows_by_state: Vec<Vec<Vec<usize>>>,
    generator: GeneratorModel,
    critic: CriticModel,
    gen_adam: AdamState,
    critic_adam: AdamState,
    rng: ChaCha8Rng,
    resampled: usize,
}

impl<'a> Trainer<'a> {
    fn sample_conds(&mut self, n: usize) -> Vec<ConditionalVector> {
        (0..n)
            .map(|_| loop {
                let c = self.sampler.sample(&mut self.rng);
                if !self.rows_by_state[c.variable][c.state].is_empty() {
                    break c;
                }
                self.resampled += 1;
                log::warn!(
                    "no real rows for variable {} state {}; resampling the condition",
                    c.variable,
                    c.state
                );
            })
            .collect()
    }

    fn real_rows(&mut self, conds: &[ConditionalVector]) -> Tensor {
        let idx: Vec<usize> = conds
            .iter()
            .map(|c| {
                let pool = &self.rows_by_state[c.variable][c.state];
                pool[self.rng.random_range(0..pool.len())]
            })
            .collect();
        self.data.features.select_rows(&idx)
    }

    fn generator_inputs(&mut self, cond: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let b = cond.rows();
        let z = standard_normal(b, self.config.z_dim, &mut self.rng);
        let input = Tensor::concat_cols(&[&z, cond])?;
        let noise = self
            .data
            .schema
            .cardinalities()
            .into_iter()
            .map(|k| open_uniform(b, k, &mut self.rng))
            .collect();
        Ok((input, noise))
    }

    fn critic_step(&mut self) -> Result<(f64, f64)> {
        let b = self.config.batch_size;
        let w = self.data.schema.width();
        let conds = self.sample_conds(b);
        let cond = cond_matrix(&conds, w);
        let real = self.real_rows(&conds);
        let (input, noise) = self.generator_inputs(&cond)?;
        let heads = forward(&self.generator.spec, &self.generator.params, &input, Some(&noise))?;
        let head_refs: Vec<&Tensor> = heads.iter().collect();
        let fake = Tensor::concat_cols(&head_refs)?;

        let pac = self.config.pac;
        let real_p = pack(&real, &cond, pac)?;
        let fake_p = pack(&fake, &cond, pac)?;
        let eps: Vec<f64> = (0..real_p.rows()).map(|_| self.rng.random()).collect();

        let mut g = Graph::new();
        let cp = BoundParams::trainable(&mut g, &self.critic.params);
        let rv = g.constant(real_p.clone());
        let fv = g.constant(fake_p.clone());
        let s_real = forward_graph(&mut g, &self.critic.spec, &cp, rv, None)?.outputs[0];
        let s_fake = forward_graph(&mut g, &self.critic.spec, &cp, fv, None)?.outputs[0];
        let m_real = g.mean(s_real);
        let m_fake = g.mean(s_fake);
        let mut loss = g.sub(m_fake, m_real)?;
        let mut gp_value = 0.0;
        if self.config.gp_lambda > 0.0 {
            let gp = gradient_penalty_node(&mut g, &self.critic.spec, &cp, &real_p, &fake_p, &eps)?;
            gp_value = g.value(gp).data()[0];
            let scaled = g.scale(gp, self.config.gp_lambda);
            loss = g.add(loss, scaled)?;
        }
        let value = g.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::Numerical(format!("critic loss is {value}")));
        }
        let grads = g.backward(loss)?;
        let grads = cp.gradients(&g, &grads);
        adam_step(&mut self.critic.params, &grads, &mut self.critic_adam)?;
        Ok((value, gp_value))
    }

    fn generator_step(&mut self) -> Result<(f64, f64)> {
        let b = self.config.batch_size;
        let w = self.data.schema.width();
        let conds = self.sample_conds(b);
        let cond = cond_matrix(&conds, w);
        let (input, noise) = self.generator_inputs(&cond)?;

        let mut g = Graph::new();
        let gp = BoundParams::trainable(&mut g, &self.generator.params);
        let cp = BoundParams::frozen(&mut g, &self.critic.params);
        let x = g.constant(input);
        let heads = forward_graph(&mut g, &self.generator.spec, &gp, x, Some(&noise))?;
        let fake = g.concat_cols(&heads.outputs)?;
        let cv = g.constant(cond.clone());
        let joined = g.concat_cols(&[fake, cv])?;
        let pac = self.config.pac;
        let packed = g.reshape(joined, b / pac, pac * 2 * w)?;
        let score = forward_graph(&mut g, &self.critic.spec, &cp, packed, None)?.outputs[0];
        let mean_score = g.mean(score);
        let adv = g.scale(mean_score, -1.0);

        let log_probs: Vec<Var> = heads.logits.iter().map(|&l| g.log_softmax(l)).collect();
        let all = g.concat_cols(&log_probs)?;
        let mask = g.constant(cond);
        let picked = g.mul(all, mask)?;
        let total = g.sum(picked);
        let ce = g.scale(total, -1.0 / b as f64);
        let ce_value = g.value(ce).data()[0];

        let loss = g.add(adv, ce)?;
        let value = g.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::Numerical(format!("generator loss is {value}")));
        }
        let grads = g.backward(loss)?;
        let grads = gp.gradients(&g, &grads);
        adam_step(&mut self.generator.params, &grads, &mut self.gen_adam)?;
        Ok((value, ce_value))
    }
}

/// Trains generator and critic for `config.epochs` epochs of
/// `max(1, N / batch_size)` batches each.
pub fn train_ctwgan(
    dataset: &EncodedDataset,
    config: &GanConfig,
    seed: u64,
) -> Result<(CtwganModel, Vec<GanEpochLog>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    let schema = &dataset.schema;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen_spec = generator_spec(schema, config)?;
    let crit_spec = critic_spec(schema, config)?;
    let generator = GeneratorModel {
        params: ParameterSet::init(&gen_spec, &mut rng),
        spec: gen_spec,
    };
    let critic = CriticModel {
        params: ParameterSet::init(&crit_spec, &mut rng),
        spec: crit_spec,
    };

    let offsets = schema.offsets();
    let mut rows_by_state: Vec<Vec<Vec<usize>>> = schema.cardinalities().iter().map(|&k| vec![Vec::new(); k]).collect();
    for (i, row) in dataset.features.iter_rows().enumerate() {
        for (v, &off) in offsets.iter().enumerate() {
            let k = rows_by_state[v].len();
            let s = crate::nn::argmax(&row[off..off + k]);
            rows_by_state[v][s].push(i);
        }
    }

    let mut t = Trainer {
        config,
        data: dataset,
        sampler: CondSampler::from_dataset(dataset, config.log_frequency)?,
        rows_by_state,
        gen_adam: AdamState::new(&generator.params, config.generator_adam)?,
        critic_adam: AdamState::new(&critic.params, config.critic_adam)?,
        generator,
        critic,
        rng,
        resampled: 0,
    };

    let steps = (dataset.len() / config.batch_size).max(1);
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        t.resampled = 0;
        let (mut c_loss, mut gp, mut g_loss, mut ce) = (0.0, 0.0, 0.0, 0.0);
        let mut g_updates = 0usize;
        for step in 0..steps {
            let (cl, p) = t.critic_step()?;
            c_loss += cl;
            gp += p;
            if (step + 1) % config.k_sync == 0 {
                let (gl, e) = t.generator_step()?;
                g_loss += gl;
                ce += e;
                g_updates += 1;
            }
        }
        let gu = g_updates.max(1) as f64;
        let entry = GanEpochLog {
            epoch,
            critic_loss: c_loss / steps as f64,
            generator_loss: g_loss / gu,
            gradient_penalty: gp / steps as f64,
            cond_cross_entropy: ce / gu,
            resampled_conditions: t.resampled,
        };
        log::debug!("ctwgan {entry:?}");
        log.push(entry);
    }

    let model = CtwganModel {
        config: config.clone(),
        schema: schema.clone(),
        schema_fingerprint: schema.fingerprint(),
        cond_sampler: t.sampler,
        generator: t.generator,
        critic: t.critic,
        epochs_trained: config.epochs,
    };
    Ok((model, log))
}

const SAMPLE_CHUNK: usize = 2048;

/// Generates `n` hardened one-hot rows.
///
/// Each row gets its own condition drawn from the training PMFs unless
/// `manual_cond` fixes one for all rows. Head outputs are gumbel-perturbed
/// and then hardened by argmax.
pub fn sample_features<R: Rng + ?Sized>(
    model: &CtwganModel,
    n: usize,
    rng: &mut R,
    manual_cond: Option<&ConditionalVector>,
) -> Result<Tensor> {
    if model.epochs_trained == 0 {
        return Err(Error::NotTrained);
    }
    let schema = &model.schema;
    let w = schema.width();
    if let Some(c) = manual_cond {
        if c.width != w {
            return Err(Error::Shape(format!("condition width {} vs schema width {w}", c.width)));
        }
    }
    let mut parts = Vec::new();
    let mut done = 0;
    while done < n {
        let b = SAMPLE_CHUNK.min(n - done);
        let conds: Vec<ConditionalVector> = (0..b)
            .map(|_| match manual_cond {
                Some(c) => *c,
                None => model.cond_sampler.sample(rng),
            })
            .collect();
        let cond = cond_matrix(&conds, w);
        let z = standard_normal(b, model.config.z_dim, rng);
        let input = Tensor::concat_cols(&[&z, &cond])?;
        let noise: Vec<Tensor> = schema
            .cardinalities()
            .into_iter()
            .map(|k| open_uniform(b, k, rng))
            .collect();
        let heads = forward(&model.generator.spec, &model.generator.params, &input, Some(&noise))?;
        let refs: Vec<&Tensor> = heads.iter().collect();
        parts.push(harden(schema, &Tensor::concat_cols(&refs)?));
        done += b;
    }
    if parts.is_empty() {
        return Tensor::matrix(0, w, Vec::new());
    }
    Tensor::concat_rows(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AuctionRecord, Variable};
    use crate::nn::DenseLayer;

    fn linear_critic(w: Vec<f64>) -> CriticModel {
        let d = w.len();
        CriticModel {
            spec: MlpSpec::new(
                d,
                &[],
                vec![HeadSpec {
                    dim: 1,
                    kind: HeadKind::Linear,
                }],
            )
            .unwrap(),
            params: ParameterSet {
                layers: vec![DenseLayer {
                    weight: Tensor::matrix(d, 1, w).unwrap(),
                    bias: Tensor::scalar(0.0),
                }],
            },
        }
    }

    #[test]
    fn gradient_penalty_analytic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let real = standard_normal(7, 2, &mut rng);
        let fake = standard_normal(7, 2, &mut rng);
        let gp = gradient_penalty(&linear_critic(vec![3.0, 4.0]), &real, &fake, &mut rng).unwrap();
        assert!((gp - 16.0).abs() < 1e-9);
        let gp = gradient_penalty(&linear_critic(vec![0.6, 0.8]), &real, &fake, &mut rng).unwrap();
        assert!(gp.abs() < 1e-12);
        let gp = gradient_penalty(&linear_critic(vec![0.0, 0.0]), &real, &fake, &mut rng).unwrap();
        assert_eq!(gp, 1.0);
    }

    #[test]
    fn wasserstein_term_vanishes_on_identical_batches_and_flips_on_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MlpSpec::new(
            4,
            &[(5, Activation::LeakyRelu(0.2))],
            vec![HeadSpec {
                dim: 1,
                kind: HeadKind::Linear,
            }],
        )
        .unwrap();
        let critic = CriticModel {
            params: ParameterSet::init(&spec, &mut rng),
            spec,
        };
        let a = standard_normal(6, 4, &mut rng);
        let b = standard_normal(6, 4, &mut rng);
        let d = |x: &Tensor, y: &Tensor| critic_score(&critic, y).unwrap() - critic_score(&critic, x).unwrap();
        assert_eq!(d(&a, &a), 0.0);
        assert_eq!(d(&a, &b), -d(&b, &a));
    }

    #[test]
    fn ce_penalty_cases() {
        let schema = Schema::new(
            vec![
                Variable::new("m", &["0", "1"]),
                Variable::new("number of bidders", &["1", "2", "3"]),
            ],
            "m",
        )
        .unwrap();
        let c = ConditionalVector::new(&schema, 1, 2).unwrap();
        let sure = vec![Tensor::row(vec![0.5, 0.5]), Tensor::row(vec![0.0, 0.0, 1.0])];
        assert_eq!(ce_condition_penalty(&sure, &[c]).unwrap(), 0.0);
        let uniform = vec![
            Tensor::row(vec![0.5, 0.5]),
            Tensor::row(vec![1. / 3., 1. / 3., 1. / 3.]),
        ];
        assert!((ce_condition_penalty(&uniform, &[c]).unwrap() - 3f64.ln()).abs() < 1e-12);
        let half = vec![Tensor::row(vec![0.5, 0.5]), Tensor::row(vec![0.25, 0.25, 0.5])];
        assert!((ce_condition_penalty(&half, &[c]).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = GanConfig {
            batch_size: 25,
            pac: 10,
            ..GanConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(GanConfig {
            k_sync: 0,
            ..GanConfig::default()
        }
        .validate()
        .is_err());
        GanConfig::default().validate().unwrap();
    }

    fn toy_dataset() -> EncodedDataset {
        let schema = Schema::new(
            vec![
                Variable::new("m", &["0", "1"]),
                Variable::new("number of bidders", &["1", "2"]),
            ],
            "m",
        )
        .unwrap();
        let recs: Vec<AuctionRecord> = (0..40)
            .map(|i| AuctionRecord {
                auction_id: i.to_string(),
                states: vec![i % 2, 0],
                bids: vec![1.0 + i as f64],
            })
            .collect();
        EncodedDataset::encode_fit(&recs, &schema).unwrap()
    }

    #[test]
    fn packing_width_and_order() {
        let rows = Tensor::matrix(4, 1, vec![1., 2., 3., 4.]).unwrap();
        let conds = Tensor::matrix(4, 1, vec![5., 6., 7., 8.]).unwrap();
        let p = pack(&rows, &conds, 2).unwrap();
        assert_eq!(p.shape(), &[2, 4]);
        assert_eq!(p.row_slice(1), &[3., 7., 4., 8.]);
        assert!(pack(&rows, &conds, 3).is_err());
    }

    #[test]
    fn untrained_and_empty_sampling() {
        let d = toy_dataset();
        let cfg = GanConfig {
            epochs: 1,
            batch_size: 20,
            ..GanConfig::default()
        };
        let (mut model, log) = train_ctwgan(&d, &cfg, 3).unwrap();
        assert_eq!(log.len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let empty = sample_features(&model, 0, &mut rng, None).unwrap();
        assert_eq!(empty.rows(), 0);
        let rows = sample_features(&model, 33, &mut rng, None).unwrap();
        for row in rows.iter_rows() {
            assert_eq!(row[0] + row[1], 1.0);
            assert_eq!(row[2] + row[3], 1.0);
        }
        model.epochs_trained = 0;
        assert!(matches!(
            sample_features(&model, 3, &mut rng, None),
            Err(Error::NotTrained)
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let d = toy_dataset();
        let cfg = GanConfig {
            epochs: 3,
            batch_size: 20,
            ..GanConfig::default()
        };
        let (a, la) = train_ctwgan(&d, &cfg, 11).unwrap();
        let (b, lb) = train_ctwgan(&d, &cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }
}
