//! Quality checks for synthetic auctions: classifier-based inception scoring,
//! bid distribution distances, and the regression-tree BidNet baseline.

pub mod baseline;
pub mod classify;
pub mod distance;
pub mod double;
pub mod inception;
pub mod metrics;

pub use baseline::{bidnet_baseline_tree, train_regression_tree, RegressionTree};
pub use classify::{
    train_classifier, train_cmlp, train_decision_tree, train_knn, Classifier, ClassifierConfig, ClassifierKind,
    DecisionTree, Knn,
};
pub use distance::{emd_1d, inverse_normal_cdf, qq_points, qq_points_csv, qq_rmse, quantile, QqPoint};
pub use double::{
    distance_csv, double_validation, double_validation_samples, BidSamples, DistancePair, DistanceReport,
};
pub use inception::{inception_report, inception_score, target_split, InceptionConfig, InceptionReport, InceptionRow};
pub use metrics::ConfusionMatrix;
