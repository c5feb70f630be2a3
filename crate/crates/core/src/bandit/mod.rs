//! Sequential selection policies over category arms.

mod baseline;
mod beta;
mod revised;

pub use baseline::{select_baseline, update_baseline, BaselinePolicy, BernoulliArmStats};
pub use beta::{beta_sample, BetaSource};
pub use revised::{
    ArmState, Candidate, Pick, RevisedThompson, RevisedTsConfig, ScoreUpdate, SelectionRule,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BanditError {
    #[error("beta parameters must be positive and finite (alpha={alpha}, beta={beta})")]
    InvalidBeta { alpha: f64, beta: f64 },
    #[error("normalized score {0} is outside (0, 1)")]
    ScoreOutOfRange(f64),
    #[error("no items to initialize from")]
    NoItems,
    #[error("key {0} is already in use")]
    DuplicateKey(usize),
    #[error("arm {0} does not exist")]
    InvalidArm(usize),
    #[error("item {0} already received feedback")]
    DoubleFeedback(usize),
    #[error("item {0} was never selected")]
    NotSelected(usize),
    #[error("invalid policy config: {0}")]
    Config(String),
}
