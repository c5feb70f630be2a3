//! Dynamic re-ranking: a pairwise pre-ranker whose scores seed a revised
//! Thompson sampling post-ranker driven by click feedback.
//!
//! - [`catalog`]: items, catalog I/O, score normalization
//! - [`pretrain`]: the pairwise hinge-loss scorer
//! - [`bandit`]: revised Thompson sampling and baseline bandits
//! - [`sim`]: click model, case study, browsing sessions
//! - [`metrics`]: dcg, page-wise dcg, aggregation
//! - [`harness`]: experiment configs, synthetic catalogs, artifact output

pub mod bandit;
pub mod catalog;
pub mod harness;
pub mod metrics;
pub mod pretrain;
pub mod sim;

pub use bandit::{BaselinePolicy, RevisedThompson, RevisedTsConfig};
pub use catalog::{load_catalog, normalize_scores, Catalog, Item, ScoredItem};
pub use metrics::{dcg, page_dcg, PagedList, RankedList};
pub use pretrain::{MlpParams, TrainConfig};
pub use sim::{ClickModel, RoundLog, UserProfile};
