use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use auctionsynth::bidnet::{train_bidnet_cv, BidNetModel, CvReport};
use auctionsynth::ctwgan::{train_ctwgan, CtwganModel};
use auctionsynth::data::{
    load_csv, oracle_generate, train_test_split, write_csv, AuctionRecord, BidTransform, ConditionalVector,
    EncodedDataset, Schema,
};
use auctionsynth::persist::{load_dataset, load_model, save_dataset, save_model, DatasetCache, Model, Provenance};
use auctionsynth::sampler::{generate_auctions, to_records, Synthesizer};
use auctionsynth::tvae::{train_tvae, TvaeModel};
use auctionsynth::validate::{
    bidnet_baseline_tree, distance_csv, double_validation, inception_report, qq_points, qq_points_csv, ClassifierKind,
    DistanceReport, InceptionReport,
};

use crate::checks::{evaluate, Check};
use crate::config::{ModelKind, RunConfig};
use crate::UsageError;

pub const DATASET_FILE: &str = "dataset.json";
pub const SPLIT_FILE: &str = "split.json";
pub const CV_BIDNET_JSON: &str = "cv_bidnet.json";

pub fn model_file(kind: ModelKind) -> String {
    format!("model_{}.json", kind.name())
}

/// Resolved configuration plus the provenance stamped on every artifact.
pub struct Context {
    pub cfg: RunConfig,
    pub provenance: Provenance,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let provenance = cfg.provenance()?;
        Ok(Context { cfg, provenance })
    }

    pub fn out(&self) -> PathBuf {
        self.cfg.out()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out().join(name)
    }

    fn ensure_out(&self) -> Result<()> {
        let out = self.out();
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))
    }

    /// One-line stamp for CSV and text artifacts.
    pub fn stamp(&self) -> String {
        format!(
            "auctionsynth {} seed={} config_hash={}",
            self.provenance.version, self.provenance.seed, self.provenance.config_hash
        )
    }

    fn write_text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, format!("# {}\n{body}", self.stamp()))
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            provenance: &'a Provenance,
            #[serde(flatten)]
            body: &'a T,
        }
        let path = self.path(name);
        let text = serde_json::to_string_pretty(&Stamped {
            provenance: &self.provenance,
            body: value,
        })?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Records and schema from whichever source the config names.
pub fn load_source(cfg: &RunConfig) -> Result<(Schema, Vec<AuctionRecord>)> {
    if let Some(oracle) = cfg.oracle_config()? {
        let records = oracle_generate(&oracle, cfg.oracle_auctions, cfg.seed)?;
        return Ok((oracle.schema, records));
    }
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| UsageError("config sets neither `data` nor `oracle`".into()))?;
    let schema_path = cfg
        .schema
        .as_ref()
        .ok_or_else(|| UsageError("`data` needs a `schema` file".into()))?;
    let schema = Schema::load(cfg.resolve(schema_path))?;
    let records = load_csv(cfg.resolve(data), &schema)?;
    Ok((schema, records))
}

pub fn preprocess(ctx: &Context) -> Result<DatasetCache> {
    let cfg = &ctx.cfg;
    let (schema, records) = load_source(cfg)?;
    let split = train_test_split(records.len(), cfg.test_fraction, cfg.seed)?;
    let train: Vec<AuctionRecord> = split.train.iter().map(|&i| records[i].clone()).collect();
    let transform = BidTransform::fit_records(&train)?;
    let dataset = EncodedDataset::encode(&records, &schema, transform)?;
    ctx.ensure_out()?;
    save_dataset(ctx.path(DATASET_FILE), dataset, split.clone(), ctx.provenance.clone())?;
    ctx.write_json(SPLIT_FILE, &split)?;
    log::info!(
        "preprocessed {} auctions ({} train, {} test)",
        records.len(),
        split.train.len(),
        split.test.len()
    );
    Ok(load_dataset(ctx.path(DATASET_FILE))?)
}

/// Loads the cached dataset, building it first when absent.
pub fn dataset(ctx: &Context) -> Result<DatasetCache> {
    let path = ctx.path(DATASET_FILE);
    if !path.exists() {
        log::info!("{} missing, running preprocess", path.display());
        return preprocess(ctx);
    }
    let cache = load_dataset(&path)?;
    if cache.split.seed != ctx.cfg.seed || cache.split.test_fraction != ctx.cfg.test_fraction {
        return Err(UsageError(format!(
            "{} was built with seed {} and test fraction {}; re-run preprocess",
            path.display(),
            cache.split.seed,
            cache.split.test_fraction
        ))
        .into());
    }
    Ok(cache)
}

fn model_kind(ctx: &Context) -> Result<ModelKind> {
    ctx.cfg
        .model_kind
        .ok_or_else(|| UsageError("no model kind given (set `model_kind` or pass --model)".into()).into())
}

pub fn train(ctx: &Context) -> Result<PathBuf> {
    let kind = model_kind(ctx)?;
    let cache = dataset(ctx)?;
    let train = cache.train();
    let seed = ctx.cfg.seed;
    let model = match kind {
        ModelKind::Ctwgan => {
            let (model, log) = train_ctwgan(&train, &ctx.cfg.ctwgan, seed)?;
            let mut s = String::from(
                "epoch,critic_loss,generator_loss,gradient_penalty,cond_cross_entropy,resampled_conditions\n",
            );
            for l in &log {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    l.epoch,
                    l.critic_loss,
                    l.generator_loss,
                    l.gradient_penalty,
                    l.cond_cross_entropy,
                    l.resampled_conditions
                );
            }
            ctx.write_text("train_log_ctwgan.csv", &s)?;
            Model::Ctwgan(model)
        }
        ModelKind::Tvae => {
            let (model, log) = train_tvae(&train, &ctx.cfg.tvae, seed)?;
            let mut s = String::from("epoch,loss,reconstruction,kl\n");
            for l in &log {
                let _ = writeln!(s, "{},{},{},{}", l.epoch, l.loss, l.reconstruction, l.kl);
            }
            ctx.write_text("train_log_tvae.csv", &s)?;
            Model::Tvae(model)
        }
        ModelKind::Bidnet => {
            let (model, report) = train_bidnet_cv(&train, &ctx.cfg.bidnet, seed)?;
            ctx.write_text("cv_bidnet.csv", &report.to_csv())?;
            ctx.write_json(CV_BIDNET_JSON, &report)?;
            log::info!("bidnet cv mean nll {:.4}, best {:.4}", report.mean, report.best_nll());
            Model::Bidnet(model)
        }
    };
    let path = ctx.path(&model_file(kind));
    save_model(&path, model, ctx.provenance.clone())?;
    Ok(path)
}

fn load_kind(ctx: &Context, kind: ModelKind) -> Result<Model> {
    let path = ctx.path(&model_file(kind));
    if !path.exists() {
        return Err(UsageError(format!(
            "{} not found; train a {} model first",
            path.display(),
            kind.name()
        ))
        .into());
    }
    Ok(load_model(&path)?.model)
}

pub enum LoadedSynth {
    Ctwgan(CtwganModel),
    Tvae(TvaeModel),
}

impl LoadedSynth {
    pub fn as_synth(&self) -> Synthesizer<'_> {
        match self {
            LoadedSynth::Ctwgan(m) => Synthesizer::Ctwgan(m),
            LoadedSynth::Tvae(m) => Synthesizer::Tvae(m),
        }
    }
}

pub fn load_synthesizer(ctx: &Context, kind: ModelKind) -> Result<LoadedSynth> {
    match (kind, load_kind(ctx, kind)?) {
        (ModelKind::Ctwgan, Model::Ctwgan(m)) => Ok(LoadedSynth::Ctwgan(m)),
        (ModelKind::Tvae, Model::Tvae(m)) => Ok(LoadedSynth::Tvae(m)),
        (ModelKind::Bidnet, _) => Err(UsageError("bidnet is not a feature synthesizer".into()).into()),
        (k, m) => Err(UsageError(format!("{} holds a {} model", model_file(k), m.kind())).into()),
    }
}

pub fn load_bidnet(ctx: &Context) -> Result<BidNetModel> {
    match load_kind(ctx, ModelKind::Bidnet)? {
        Model::Bidnet(m) => Ok(m),
        m => Err(UsageError(format!("{} holds a {} model", model_file(ModelKind::Bidnet), m.kind())).into()),
    }
}

/// Splits `n` into `parts` block sizes, the remainder going to the first blocks.
pub fn block_sizes(n: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|j| n / parts + usize::from(j < n % parts)).collect()
}

/// Draws `n` synthetic auctions. With several conditions the auctions are
/// generated in consecutive blocks, one condition per block.
pub fn sample(ctx: &Context, n: usize, conds: &[String]) -> Result<PathBuf> {
    let kind = match ctx.cfg.model_kind {
        None | Some(ModelKind::Bidnet) => ctx.cfg.validate.synthesizer,
        Some(k) => k,
    };
    let synth = load_synthesizer(ctx, kind)?;
    let bidnet = load_bidnet(ctx)?;
    let schema = synth.as_synth().schema()?.clone();
    let conds = conds
        .iter()
        .map(|c| ConditionalVector::parse(&schema, c).map_err(|e| UsageError(e.to_string()).into()))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let mut auctions = Vec::with_capacity(n);
    if conds.is_empty() {
        auctions = generate_auctions(synth.as_synth(), &bidnet, &bidnet.transform, n, &mut rng, None)?;
    } else {
        for (cond, size) in conds.iter().zip(block_sizes(n, conds.len())) {
            auctions.extend(generate_auctions(
                synth.as_synth(),
                &bidnet,
                &bidnet.transform,
                size,
                &mut rng,
                Some(cond),
            )?);
        }
    }
    ctx.ensure_out()?;
    let path = ctx.path(&format!("synthetic_{}.csv", kind.name()));
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(
        std::io::BufWriter::new(file),
        &schema,
        &to_records(&auctions),
        Some(&ctx.stamp()),
    )?;
    log::info!("wrote {} auctions to {}", auctions.len(), path.display());
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub synthesizer: ModelKind,
    pub synthetic_rows: usize,
    pub inception: InceptionReport,
    pub distances: [DistanceReport; 3],
    pub bidnet_cv: CvReport,
    pub baseline_cv: CvReport,
    pub checks: Vec<Check>,
}

pub fn validate(ctx: &Context) -> Result<ValidationReport> {
    let cfg = &ctx.cfg;
    let vcfg = &cfg.validate;
    let cache = dataset(ctx)?;
    let (train, test) = (cache.train(), cache.test());
    if test.is_empty() {
        return Err(UsageError("validation needs a test split (test_fraction > 0)".into()).into());
    }
    let synth = load_synthesizer(ctx, vcfg.synthesizer)?;
    let bidnet = load_bidnet(ctx)?;
    let cv_path = ctx.path(CV_BIDNET_JSON);
    let bidnet_cv: CvReport =
        serde_json::from_str(&fs::read_to_string(&cv_path).with_context(|| format!("reading {}", cv_path.display()))?)?;
    if synth.as_synth().fingerprint()? != train.schema.fingerprint() {
        return Err(auctionsynth::Error::FingerprintMismatch {
            expected: train.schema.fingerprint(),
            found: synth.as_synth().fingerprint()?,
        }
        .into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let synthetic = synth.as_synth().sample(vcfg.synthetic_rows, &mut rng, None)?;
    let inception = inception_report(
        &synthetic,
        &test.features,
        &test.schema,
        &ClassifierKind::ALL,
        &vcfg.inception,
        cfg.seed,
    )?;
    let distances = double_validation(&test, &synthetic, &bidnet, cfg.seed, vcfg.qq_levels)?;
    let baseline_cv = bidnet_baseline_tree(&train, cfg.bidnet.folds, vcfg.baseline_max_depth, cfg.seed)?;
    let oracle = cfg.oracle_config()?;
    let checks = evaluate(
        oracle.as_ref().map(|o| (o, &train.transform)),
        &synthetic,
        &inception,
        &distances,
        &bidnet_cv,
        &baseline_cv,
    )?;

    ctx.write_text("inception.csv", &inception.to_csv())?;
    ctx.write_text("inception_summary.txt", &inception.summary())?;
    ctx.write_text("distances.csv", &distance_csv(&distances))?;
    ctx.write_text("cv_baseline.csv", &baseline_cv.to_csv())?;
    let report = ValidationReport {
        synthesizer: vcfg.synthesizer,
        synthetic_rows: vcfg.synthetic_rows,
        inception,
        distances,
        bidnet_cv,
        baseline_cv,
        checks,
    };
    ctx.write_json("report.json", &report)?;
    for c in &report.checks {
        log::info!(
            "{} {} = {:.4} (threshold {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    Ok(report)
}

/// Writes `oracle.csv`, `schema.toml` and `oracle.json` for the configured
/// oracle (the built-in one when none is set).
pub fn oracle_gen(ctx: &Context, n: Option<usize>) -> Result<PathBuf> {
    let oracle = ctx
        .cfg
        .oracle_config()?
        .unwrap_or_else(auctionsynth::data::OracleConfig::desk_default);
    let n = n.unwrap_or(ctx.cfg.oracle_auctions);
    let records = oracle_generate(&oracle, n, ctx.cfg.seed)?;
    ctx.ensure_out()?;
    let path = ctx.path("oracle.csv");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(
        std::io::BufWriter::new(file),
        &oracle.schema,
        &records,
        Some(&ctx.stamp()),
    )?;
    ctx.write_text("schema.toml", &oracle.schema.to_toml_string())?;
    ctx.write_json("oracle.json", &oracle)?;
    Ok(path)
}

/// Normal QQ points of the training split's standardized log bids, restricted
/// to auctions that satisfy every condition given.
pub fn qq(ctx: &Context, conds: &[String]) -> Result<PathBuf> {
    let cache = dataset(ctx)?;
    let train = cache.train();
    let conds = conds
        .iter()
        .map(|c| ConditionalVector::parse(&train.schema, c).map_err(|e| UsageError(e.to_string()).into()))
        .collect::<Result<Vec<_>>>()?;
    let bids: Vec<f64> = (0..train.len())
        .filter(|&i| conds.iter().all(|c| c.satisfied_by(train.features.row_slice(i))))
        .flat_map(|i| train.bids[i].iter().copied())
        .collect();
    if bids.is_empty() {
        return Err(auctionsynth::Error::Data("no training bids satisfy the given conditions".into()).into());
    }
    let points = qq_points(&bids, ctx.cfg.validate.qq_levels)?;
    Ok(ctx.write_text("qq.csv", &qq_points_csv(&points))?)
}
