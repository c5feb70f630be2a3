//! M-armed Bernoulli case study: every policy faces the same click model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClickModel, SimError};
use crate::bandit::{
    select_baseline, update_baseline, BaselinePolicy, BernoulliArmStats, RevisedThompson,
    RevisedTsConfig,
};
use crate::catalog::SCORE_EPSILON;

/// Initial normalized score of a case-study arm before personalization.
pub const NEUTRAL_SCORE: f64 = 0.5;

/// Personalization of the default fixture: the best arm starts at 0.7.
pub const DEFAULT_OFFSETS: [f64; 5] = [0.2, 0.0, 0.0, 0.0, 0.0];

#[derive(Debug, Clone, PartialEq)]
pub enum CasePolicy {
    /// Revised Thompson sampling over inexhaustible single-item arms.
    /// `offsets[c]` shifts arm `c`'s initial score away from 0.5.
    RevisedTs {
        config: RevisedTsConfig,
        offsets: Vec<f64>,
    },
    Baseline(BaselinePolicy),
    /// Always pulls the truly best arm.
    Oracle,
}

impl CasePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            CasePolicy::RevisedTs { .. } => "revised-ts",
            CasePolicy::Baseline(b) => b.name(),
            CasePolicy::Oracle => "oracle",
        }
    }

    /// The five policies of the standard comparison on the default fixture.
    pub fn standard_set() -> Vec<CasePolicy> {
        vec![
            CasePolicy::RevisedTs {
                config: RevisedTsConfig::default(),
                offsets: DEFAULT_OFFSETS.to_vec(),
            },
            CasePolicy::Baseline(BaselinePolicy::NormalTs),
            CasePolicy::Baseline(BaselinePolicy::Ucb1),
            CasePolicy::Baseline(BaselinePolicy::EpsGreedy { epsilon: 0.1 }),
            CasePolicy::Baseline(BaselinePolicy::Random),
        ]
    }
}

/// One row of the per-round log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub policy: String,
    pub seed: u64,
    /// 1-based.
    pub round: u64,
    pub arm: usize,
    /// Served item, when the policy serves items rather than bare arms.
    pub item_id: String,
    pub reward: u8,
    pub regret: f64,
    pub cum_reward: u64,
    pub cum_regret: f64,
}

pub const ROUND_LOG_HEADER: [&str; 9] = [
    "policy",
    "seed",
    "round",
    "arm",
    "item_id",
    "reward",
    "regret",
    "cum_reward",
    "cum_regret",
];

/// Seed of run `run` given the experiment's base seed.
pub fn run_seed(base_seed: u64, run: u64) -> u64 {
    base_seed.wrapping_add(run)
}

enum Driver {
    Revised {
        sampler: RevisedThompson,
        scores: Vec<f64>,
        next_key: usize,
    },
    Baseline {
        policy: BaselinePolicy,
        stats: Vec<BernoulliArmStats>,
    },
    Oracle(usize),
}

impl Driver {
    fn new(policy: &CasePolicy, model: &ClickModel) -> Result<Self, SimError> {
        let m = model.num_arms();
        Ok(match policy {
            CasePolicy::RevisedTs { config, offsets } => {
                if offsets.len() > m {
                    return Err(SimError::Invalid(format!(
                        "{} personalization offsets for {m} arms",
                        offsets.len()
                    )));
                }
                let scores: Vec<f64> = (0..m)
                    .map(|c| {
                        (NEUTRAL_SCORE + offsets.get(c).copied().unwrap_or(0.0))
                            .clamp(SCORE_EPSILON, 1.0 - SCORE_EPSILON)
                    })
                    .collect();
                let sampler = RevisedThompson::from_candidates(
                    scores.iter().enumerate().map(|(c, &y)| (c, c, y)),
                    config.clone(),
                )?;
                Driver::Revised {
                    sampler,
                    scores,
                    next_key: m,
                }
            }
            CasePolicy::Baseline(b) => Driver::Baseline {
                policy: *b,
                stats: vec![BernoulliArmStats::default(); m],
            },
            CasePolicy::Oracle => Driver::Oracle(model.best_arm().0),
        })
    }

    /// Returns the arm and the served item id, if any.
    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (usize, Option<usize>) {
        match self {
            Driver::Revised { sampler, .. } => {
                let pick = sampler
                    .select_next(rng)
                    .expect("case-study arms are replenished every round");
                (pick.arm, Some(pick.key))
            }
            Driver::Baseline { policy, stats } => (select_baseline(*policy, stats, rng), None),
            Driver::Oracle(best) => (*best, None),
        }
    }

    fn observe(&mut self, arm: usize, key: Option<usize>, clicked: bool) -> Result<(), SimError> {
        match self {
            Driver::Revised {
                sampler,
                scores,
                next_key,
            } => {
                sampler.feedback(key.expect("revised driver serves items"), clicked)?;
                sampler.replenish(arm, *next_key, scores[arm])?;
                *next_key += 1;
            }
            Driver::Baseline { stats, .. } => update_baseline(stats, arm, clicked)?,
            Driver::Oracle(_) => {}
        }
        Ok(())
    }
}

/// One policy for one run. Immediate feedback after every pull.
pub fn run_single(
    model: &ClickModel,
    policy: &CasePolicy,
    rounds: u64,
    seed: u64,
) -> Result<Vec<RoundLog>, SimError> {
    let probs = model.click_probs();
    let (_, best_p) = model.best_arm();
    let mut driver = Driver::new(policy, model)?;
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    env_rng.set_stream(1);

    let name = policy.name().to_string();
    let mut logs = Vec::with_capacity(rounds as usize);
    let (mut cum_reward, mut cum_regret) = (0u64, 0.0f64);
    let mut outcomes = vec![false; model.num_arms()];
    for round in 1..=rounds {
        // Every arm's outcome is drawn each round so that policies run on the
        // same seed face identical users.
        for (c, o) in outcomes.iter_mut().enumerate() {
            *o = model.simulate_click(c, &mut env_rng)?;
        }
        let (arm, key) = driver.choose(&mut policy_rng);
        let clicked = outcomes[arm];
        driver.observe(arm, key, clicked)?;
        let regret = (best_p - probs[arm]).max(0.0);
        cum_reward += u64::from(clicked);
        cum_regret += regret;
        logs.push(RoundLog {
            policy: name.clone(),
            seed,
            round,
            arm,
            item_id: key.map(|k| k.to_string()).unwrap_or_default(),
            reward: u8::from(clicked),
            regret,
            cum_reward,
            cum_regret,
        });
    }
    Ok(logs)
}

/// Every policy for `runs` seeds, ordered by policy, then seed, then round.
pub fn run_case_study(
    model: &ClickModel,
    policies: &[CasePolicy],
    rounds: u64,
    runs: u64,
    base_seed: u64,
) -> Result<Vec<RoundLog>, SimError> {
    if rounds == 0 || runs == 0 {
        return Err(SimError::Invalid("rounds and runs must be positive".into()));
    }
    // warm the shared cache before fanning out
    model.click_probs();
    let jobs: Vec<(usize, u64)> = (0..policies.len())
        .flat_map(|p| (0..runs).map(move |r| (p, r)))
        .collect();
    let chunks = jobs
        .par_iter()
        .map(|&(p, r)| run_single(model, &policies[p], rounds, run_seed(base_seed, r)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(chunks.into_iter().flatten().collect())
}
