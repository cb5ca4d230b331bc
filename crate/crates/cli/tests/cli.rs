use std::fs;
use std::path::{Path, PathBuf};

use auctionsynth::data::{
    load_csv, oracle_generate, train_test_split, BidTransform, EncodedDataset, OracleConfig, Schema,
};
use auctionsynth::persist::load_dataset;
use auctionsynth_cli::{main_with_args, EXIT_DATA, EXIT_OK, EXIT_USAGE};

const SMALL: &str = "seed = 5\noracle = \"desk_default\"\noracle_auctions = 400\n\
                     [ctwgan]\nepochs = 4\n[tvae]\nepochs = 3\n[bidnet]\nmax_epochs = 8\n\
                     [validate]\nsynthetic_rows = 1000\nqq_levels = 50\n";

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn run(cfg: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["auctionsynth", "--config", cfg.to_str().unwrap()];
    argv.extend(args);
    main_with_args(argv)
}

/// Body of a stamped text artifact, with its provenance line checked and removed.
fn body(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let (stamp, rest) = text.split_once('\n').unwrap();
    assert!(stamp.starts_with("# auctionsynth ") && stamp.contains("seed=") && stamp.contains("config_hash="));
    rest.to_string()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn preprocess_cache_matches_in_memory_encoding() {
    let (dir, cfg) = setup(SMALL);
    assert_eq!(run(&cfg, &["preprocess"]), EXIT_OK);
    let cache = load_dataset(dir.path().join("out/dataset.json")).unwrap();

    let oracle = OracleConfig::desk_default();
    let records = oracle_generate(&oracle, 400, 5).unwrap();
    let split = train_test_split(records.len(), 0.2, 5).unwrap();
    let train: Vec<_> = split.train.iter().map(|&i| records[i].clone()).collect();
    let transform = BidTransform::fit_records(&train).unwrap();
    let expected = EncodedDataset::encode(&records, &oracle.schema, transform).unwrap();
    assert_eq!(cache.dataset, expected);
    assert_eq!(cache.split, split);
    assert_eq!(cache.provenance.seed, 5);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/split.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["provenance"]["seed"], 5);
}

#[test]
fn split_depends_only_on_seed() {
    let (a, cfg_a) = setup(SMALL);
    let (b, cfg_b) = setup(SMALL);
    assert_eq!(run(&cfg_a, &["preprocess"]), EXIT_OK);
    assert_eq!(run(&cfg_b, &["preprocess"]), EXIT_OK);
    let read = |d: &Path| fs::read(d.join("out/split.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_eq!(run(&cfg_b, &["preprocess", "--seed", "6"]), EXIT_OK);
    assert_ne!(read(a.path()), read(b.path()));
}

#[test]
fn usage_errors_exit_with_one() {
    let (_d, cfg) = setup("schema = \"missing.toml\"\n");
    assert_eq!(run(&cfg, &["preprocess"]), EXIT_USAGE);
    let (_d, cfg) = setup("model_kind = \"gan\"\n");
    assert_eq!(run(&cfg, &["train"]), EXIT_USAGE);
    let (_d, cfg) = setup(SMALL);
    assert_eq!(run(&cfg, &["train"]), EXIT_USAGE);
    assert_eq!(run(&cfg, &["train", "--model", "gan"]), EXIT_USAGE);
    assert_eq!(run(Path::new("/nonexistent/run.toml"), &["preprocess"]), EXIT_USAGE);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let schema = OracleConfig::desk_default().schema;
    fs::write(dir.path().join("schema.toml"), schema.to_toml_string()).unwrap();
    fs::write(
        dir.path().join("bids.csv"),
        "auction_id,municipality,sector,region,number of bidders,bid\nA0,0,mining,north,1,10.0\n",
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "schema = \"schema.toml\"\ndata = \"bids.csv\"\n").unwrap();
    assert_eq!(run(&cfg, &["preprocess"]), EXIT_DATA);
}

#[test]
fn csv_source_round_trips_through_oracle_gen() {
    let (dir, cfg) = setup(SMALL);
    assert_eq!(run(&cfg, &["oracle-gen", "--n", "120"]), EXIT_OK);
    let out = dir.path().join("out");
    let schema = Schema::load(out.join("schema.toml")).unwrap();
    let records = load_csv(out.join("oracle.csv"), &schema).unwrap();
    assert_eq!(records, oracle_generate(&OracleConfig::desk_default(), 120, 5).unwrap());

    let cfg2 = dir.path().join("csv.toml");
    fs::write(
        &cfg2,
        "seed = 5\nschema = \"out/schema.toml\"\ndata = \"out/oracle.csv\"\nout_dir = \"csv_out\"\n",
    )
    .unwrap();
    assert_eq!(run(&cfg2, &["preprocess"]), EXIT_OK);
    let cache = load_dataset(dir.path().join("csv_out/dataset.json")).unwrap();
    assert_eq!(cache.dataset.len(), 120);
}

#[test]
fn full_pipeline() {
    let (dir, cfg) = setup(SMALL);
    let out = dir.path().join("out");
    for m in ["ctwgan", "tvae", "bidnet"] {
        assert_eq!(run(&cfg, &["train", "--model", m]), EXIT_OK, "{m}");
    }

    // One log row per epoch.
    assert_eq!(csv_rows(&body(&out.join("train_log_ctwgan.csv"))).len(), 4);
    assert_eq!(csv_rows(&body(&out.join("train_log_tvae.csv"))).len(), 3);

    // Retraining with the same seed gives a byte-identical model file.
    let before = fs::read(out.join("model_ctwgan.json")).unwrap();
    assert_eq!(run(&cfg, &["train", "--model", "ctwgan"]), EXIT_OK);
    assert_eq!(before, fs::read(out.join("model_ctwgan.json")).unwrap());

    // n auctions, one CSV row per bid.
    assert_eq!(run(&cfg, &["sample", "--model", "ctwgan", "--n", "37"]), EXIT_OK);
    let schema = OracleConfig::desk_default().schema;
    let records = load_csv(out.join("synthetic_ctwgan.csv"), &schema).unwrap();
    assert_eq!(records.len(), 37);
    let nb_var = schema.bidder_count_index();
    let bid_rows = body(&out.join("synthetic_ctwgan.csv")).lines().count() - 1;
    let expected: usize = records
        .iter()
        .map(|r| schema.bidder_count(r.states[nb_var]).unwrap())
        .sum();
    assert_eq!(bid_rows, expected);
    assert!(records.iter().all(|r| r.bids.iter().all(|&b| b > 0.0 && b.is_finite())));

    // Conditioning only applies to the GAN; unknown variables are usage errors.
    assert_eq!(
        run(&cfg, &["sample", "--model", "tvae", "--cond", "region=north"]),
        EXIT_USAGE
    );
    assert_eq!(
        run(&cfg, &["sample", "--model", "ctwgan", "--cond", "colour=red"]),
        EXIT_USAGE
    );

    assert_eq!(run(&cfg, &["validate"]), EXIT_OK);
    for f in [
        "inception.csv",
        "inception_summary.txt",
        "distances.csv",
        "cv_baseline.csv",
        "cv_bidnet.csv",
    ] {
        assert!(!body(&out.join(f)).is_empty(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["seed"], 5);
    assert!(report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"].is_boolean()));
    assert_eq!(report["checks"].as_array().unwrap().len(), 9);

    // Gaps in the CSV are real minus synthetic test-bed scores.
    let rows = csv_rows(&body(&out.join("inception.csv")));
    assert_eq!(rows.len(), 6);
    for pair in rows.chunks(2) {
        let (syn, real) = (&pair[0], &pair[1]);
        assert_eq!((syn[1].as_str(), real[1].as_str()), ("synthetic", "real"));
        for (score, gap) in [(2, 5), (3, 6), (4, 7)] {
            let s: f64 = syn[score].parse().unwrap();
            let r: f64 = real[score].parse().unwrap();
            let g: f64 = real[gap].parse().unwrap();
            assert_eq!(g, r - s);
        }
    }

    let distances = csv_rows(&body(&out.join("distances.csv")));
    let labels: Vec<&str> = distances.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["real-vs-predicted", "real-vs-fake", "predicted-vs-fake"]);

    assert_eq!(run(&cfg, &["qq", "--cond", "municipality=1"]), EXIT_OK);
    assert_eq!(csv_rows(&body(&out.join("qq.csv"))).len(), 50);
}

#[test]
fn models_from_another_schema_are_rejected() {
    let (dir, cfg) = setup(SMALL);
    assert_eq!(run(&cfg, &["train", "--model", "ctwgan"]), EXIT_OK);

    // A BidNet trained on a schema with relabelled categories.
    let mut oracle = OracleConfig::desk_default();
    oracle.schema.variables[1].categories[0] = "building".into();
    fs::write(dir.path().join("other.json"), serde_json::to_string(&oracle).unwrap()).unwrap();
    let other = dir.path().join("other.toml");
    fs::write(
        &other,
        "seed = 5\noracle = \"other.json\"\noracle_auctions = 400\nout_dir = \"other\"\n[bidnet]\nmax_epochs = 3\n",
    )
    .unwrap();
    assert_eq!(run(&other, &["train", "--model", "bidnet"]), EXIT_OK);
    fs::copy(
        dir.path().join("other/model_bidnet.json"),
        dir.path().join("out/model_bidnet.json"),
    )
    .unwrap();
    assert_eq!(run(&cfg, &["sample", "--model", "ctwgan", "--n", "5"]), EXIT_DATA);
}
