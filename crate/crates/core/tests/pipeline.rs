use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use auctionsynth::bidnet::{gaussian_nll, predict_theta, train_bidnet_cv, BidNetConfig, GaussianParams};
use auctionsynth::ctwgan::{train_ctwgan, GanConfig};
use auctionsynth::data::{
    decode_row, oracle_generate, read_csv, write_csv, BidTransform, ConditionalVector, EncodedDataset, OracleConfig,
};
use auctionsynth::persist::{load_model, save_model, Model, Provenance};
use auctionsynth::sampler::{generate_auctions, to_records, Synthesizer};
use auctionsynth::tvae::{train_tvae, TvaeConfig};
use auctionsynth::validate::{emd_1d, qq_rmse, quantile};

fn oracle_data(n: usize, seed: u64) -> (OracleConfig, EncodedDataset) {
    let oracle = OracleConfig::desk_default();
    let records = oracle_generate(&oracle, n, seed).unwrap();
    let ds = EncodedDataset::encode_fit(&records, &oracle.schema).unwrap();
    (oracle, ds)
}

#[test]
fn two_stage_generation_respects_schema() {
    let (oracle, ds) = oracle_data(600, 3);
    let gan_cfg = GanConfig {
        epochs: 3,
        ..GanConfig::default()
    };
    let (gan, log) = train_ctwgan(&ds, &gan_cfg, 1).unwrap();
    assert_eq!(log.len(), 3);
    let bid_cfg = BidNetConfig {
        max_epochs: 5,
        ..BidNetConfig::default()
    };
    let (bidnet, cv) = train_bidnet_cv(&ds, &bid_cfg, 1).unwrap();
    assert_eq!(cv.folds.len(), 5);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let auctions = generate_auctions(Synthesizer::Ctwgan(&gan), &bidnet, &ds.transform, 200, &mut rng, None).unwrap();
    let schema = &oracle.schema;
    let nb_var = schema.bidder_count_index();
    for a in &auctions {
        assert_eq!(a.bids.len(), schema.bidder_count(a.feature_states[nb_var]).unwrap());
        assert!(a.bids.iter().all(|&b| b > 0.0 && b.is_finite()));
        assert!(a.theta.sigma2 > 0.0);
    }

    // The bid-level CSV reads back into the same auctions.
    let records = to_records(&auctions);
    let mut buf = Vec::new();
    write_csv(&mut buf, schema, &records, Some("test")).unwrap();
    let back = read_csv(buf.as_slice(), schema).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in back.iter().zip(&records) {
        assert_eq!(a.states, b.states);
        assert_eq!(a.bids, b.bids);
    }

    // A manual condition still yields the requested number of auctions.
    let cond = ConditionalVector::parse(schema, "region=west").unwrap();
    let conditioned = generate_auctions(
        Synthesizer::Ctwgan(&gan),
        &bidnet,
        &ds.transform,
        100,
        &mut rng,
        Some(&cond),
    )
    .unwrap();
    assert_eq!(conditioned.len(), 100);
}

#[test]
fn models_reload_exactly() {
    let (_, ds) = oracle_data(300, 4);
    let dir = tempfile::tempdir().unwrap();
    let (tvae, _) = train_tvae(
        &ds,
        &TvaeConfig {
            epochs: 2,
            ..TvaeConfig::default()
        },
        2,
    )
    .unwrap();
    let (bidnet, _) = train_bidnet_cv(
        &ds,
        &BidNetConfig {
            max_epochs: 3,
            ..BidNetConfig::default()
        },
        2,
    )
    .unwrap();
    let prov = Provenance::new(2, "abc");
    for (name, model) in [
        ("tvae.json", Model::Tvae(tvae)),
        ("bidnet.json", Model::Bidnet(bidnet.clone())),
    ] {
        let path = dir.path().join(name);
        save_model(&path, model.clone(), prov.clone()).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.model, model);
        assert_eq!(loaded.provenance, prov);
        let again = dir.path().join(format!("again_{name}"));
        save_model(&again, loaded.model, prov.clone()).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
    let Model::Bidnet(reloaded) = load_model(dir.path().join("bidnet.json")).unwrap().model else {
        panic!("wrong kind");
    };
    assert_eq!(
        predict_theta(&bidnet, &ds.features).unwrap(),
        predict_theta(&reloaded, &ds.features).unwrap()
    );
}

#[test]
fn bidnet_predictions_are_valid_on_every_combination() {
    let (oracle, ds) = oracle_data(800, 5);
    let (bidnet, _) = train_bidnet_cv(
        &ds,
        &BidNetConfig {
            max_epochs: 4,
            ..BidNetConfig::default()
        },
        5,
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = oracle
        .combinations
        .iter()
        .map(|c| auctionsynth::data::encode_states(&oracle.schema, &c.states))
        .collect();
    let x = auctionsynth::nn::Tensor::from_rows(&rows).unwrap();
    for (theta, row) in predict_theta(&bidnet, &x).unwrap().into_iter().zip(x.iter_rows()) {
        theta.validate().unwrap();
        assert!(decode_row(&oracle.schema, row).is_ok());
    }
}

#[test]
fn transform_round_trip() {
    let t = BidTransform::fit([10.0, 100.0, 1000.0]).unwrap();
    for b in [1.0, 55.5, 12345.0] {
        assert!((t.inverse(t.forward(b)) - b).abs() < 1e-9 * b);
    }
}

fn sample_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, 1..60)
}

proptest! {
    #[test]
    fn emd_is_a_metric(a in sample_vec(), b in sample_vec(), c in sample_vec()) {
        let ab = emd_1d(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - emd_1d(&b, &a).unwrap()).abs() <= 1e-9 * (1.0 + ab));
        let ac = emd_1d(&a, &c).unwrap();
        let cb = emd_1d(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9 * (1.0 + ab));
        prop_assert_eq!(emd_1d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn emd_of_a_shift_is_the_shift(a in sample_vec(), s in -50.0..50.0f64) {
        let b: Vec<f64> = a.iter().map(|x| x + s).collect();
        let d = emd_1d(&a, &b).unwrap();
        prop_assert!((d - s.abs()).abs() <= 1e-9 * (1.0 + d) + 1e-9);
    }

    #[test]
    fn qq_rmse_of_a_shift_is_the_shift(a in sample_vec(), s in -50.0..50.0f64, levels in 1usize..200) {
        let b: Vec<f64> = a.iter().map(|x| x + s).collect();
        let d = qq_rmse(&a, &b, levels).unwrap();
        prop_assert!((d - s.abs()).abs() <= 1e-9 * (1.0 + s.abs()));
    }

    #[test]
    fn quantiles_are_monotone_and_bounded(a in sample_vec(), p in 0.0..1.0f64, q in 0.0..1.0f64) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let (x, y) = (quantile(&a, lo).unwrap(), quantile(&a, hi).unwrap());
        prop_assert!(x <= y);
        let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= x && y <= max);
    }

    #[test]
    fn nll_is_minimised_at_the_mean(mu in -5.0..5.0f64, s2 in 0.01..10.0f64, d in 0.001..3.0f64) {
        let theta = GaussianParams::new(mu, s2).unwrap();
        let at = gaussian_nll(theta, mu).unwrap();
        prop_assert!(at < gaussian_nll(theta, mu + d).unwrap());
        prop_assert!(at < gaussian_nll(theta, mu - d).unwrap());
    }
}
