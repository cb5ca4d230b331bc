//! Schema, ingestion, encoding, conditional vectors, splits and the oracle
//! generator.

pub mod cond;
pub mod encode;
pub mod oracle;
pub mod record;
pub mod schema;
pub mod split;

pub use cond::{cond_matrix, sample_cond_vector, CondSampler, ConditionalVector};
pub use encode::{decode_row, empirical_pmf, encode_states, harden, BidTransform, EncodedDataset};
pub use oracle::{oracle_generate, OracleCombination, OracleConfig};
pub use record::{load_csv, read_csv, write_csv, AuctionRecord};
pub use schema::{Schema, Variable};
pub use split::{kfold_split, train_test_split, SplitManifest};
