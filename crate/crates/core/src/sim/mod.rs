//! Simulated users: the threshold click model for the bandit case study and
//! page-wise browsing sessions for the full pipeline.

mod case_study;
mod click;
mod session;

pub use case_study::{
    run_case_study, run_seed, run_single, CasePolicy, RoundLog, DEFAULT_OFFSETS, NEUTRAL_SCORE,
    ROUND_LOG_HEADER,
};
pub use click::{ClickModel, CLICK_PROB_DRAWS};
pub use session::{
    run_session, SessionEntry, SessionPolicy, UserProfile, MAX_PAGE_SIZE, MIN_PAGE_SIZE,
};

use thiserror::Error;

use crate::bandit::BanditError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("arm {0} out of range")]
    InvalidArm(usize),
    #[error("page size {0} outside [4, 20]")]
    PageSize(usize),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Bandit(#[from] BanditError),
}
