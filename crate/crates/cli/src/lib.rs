//! Command-line driver: config loading, the six subcommands and exit codes.

pub mod checks;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{ModelKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A bad invocation or configuration; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "auctionsynth",
    version,
    about = "Synthetic first-price sealed-bid auction data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the configured model kind.
    #[arg(long, global = true, value_enum, value_name = "KIND")]
    pub model: Option<ModelArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModelArg {
    Ctwgan,
    Tvae,
    Bidnet,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ctwgan => ModelKind::Ctwgan,
            ModelArg::Tvae => ModelKind::Tvae,
            ModelArg::Bidnet => ModelKind::Bidnet,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode the data source and write the cached dataset and split.
    Preprocess,
    /// Train the configured model on the training split.
    Train,
    /// Generate synthetic auctions as bid-level CSV.
    Sample {
        /// Number of auctions.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Fix VAR to STATE; repeat to generate one block per condition.
        #[arg(long = "cond", value_name = "VAR=STATE")]
        cond: Vec<String>,
    },
    /// Inception scoring, double validation and the BidNet baseline.
    Validate,
    /// Draw auctions from the oracle.
    OracleGen {
        /// Number of auctions (defaults to `oracle_auctions`).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Normal QQ points of standardized log bids.
    Qq {
        /// Keep only auctions with VAR at STATE; repeatable.
        #[arg(long = "cond", value_name = "VAR=STATE")]
        cond: Vec<String>,
    },
}

/// Effective configuration after command-line overrides.
pub fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = if out.is_absolute() {
            out.clone()
        } else {
            std::env::current_dir()?.join(out)
        };
    }
    if let Some(m) = cli.model {
        cfg.model_kind = Some(m.into());
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let ctx = Context::new(resolve_config(cli)?)?;
    let path = match &cli.command {
        Command::Preprocess => {
            commands::preprocess(&ctx)?;
            ctx.out().join(commands::DATASET_FILE)
        }
        Command::Train => commands::train(&ctx)?,
        Command::Sample { n, cond } => commands::sample(&ctx, *n, cond)?,
        Command::Validate => {
            let report = commands::validate(&ctx)?;
            println!("{}", report.inception.summary().trim_end());
            for c in &report.checks {
                println!(
                    "check {} = {} (threshold {}): {}",
                    c.name,
                    c.value,
                    c.threshold,
                    if c.pass { "pass" } else { "fail" }
                );
            }
            ctx.out().join("report.json")
        }
        Command::OracleGen { n } => commands::oracle_gen(&ctx, *n)?,
        Command::Qq { cond } => commands::qq(&ctx, cond)?,
    };
    println!("wrote {}", path.display());
    Ok(())
}

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use auctionsynth::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) => EXIT_USAGE,
                E::Numerical(_) | E::NonFinite(_) => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        use auctionsynth::Error as E;
        let code = |e: anyhow::Error| exit_code(&e);
        assert_eq!(code(UsageError("x".into()).into()), EXIT_USAGE);
        assert_eq!(code(E::Config("x".into()).into()), EXIT_USAGE);
        assert_eq!(code(E::Data("x".into()).into()), EXIT_DATA);
        assert_eq!(code(E::Numerical("x".into()).into()), EXIT_NUMERICAL);
        assert_eq!(
            code(anyhow::Error::from(E::NonFinite("x".into())).context("ctx")),
            EXIT_NUMERICAL
        );
        assert_eq!(code(anyhow::anyhow!("io")), EXIT_DATA);
    }

    #[test]
    fn bad_arguments_are_usage_errors() {
        assert_eq!(main_with_args(["auctionsynth", "frobnicate"]), EXIT_USAGE);
        assert_eq!(main_with_args(["auctionsynth", "train", "--model", "gan"]), EXIT_USAGE);
        assert_eq!(main_with_args(["auctionsynth", "--version"]), EXIT_OK);
    }
}
