//! Proactive need detection for a household robot.
//!
//! A scene image is turned into a structured need report by a vision-language
//! model, solutions are filtered against the robot's embodiment, surviving
//! solutions are decomposed into navigate/move/use primitives and executed in
//! a small symbolic household world. The [`eval`] module compares robot
//! answers with clustered human answers.

pub mod assets;
pub mod constraints;
pub mod eval;
pub mod gateway;
pub mod keys;
pub mod model;
pub mod names;
pub mod parse;
pub mod pipeline;
pub mod prompts;
pub mod scalar;
pub mod scenario;
pub mod sim;

pub use scalar::Exact;

pub type ClusterModelF64 = eval::ClusterModel<f64>;
pub type SimilarityReportF64 = eval::SimilarityReport<f64>;
pub type LikertStatsF64 = eval::LikertStats<f64>;
pub type ExactAblationTable = eval::AblationTable<Exact>;
pub type AblationTableF64 = eval::AblationTable<f64>;
