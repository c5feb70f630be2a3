//! Standard Bernoulli bandits used as comparison points.

use rand::Rng;

use super::{beta_sample, BanditError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselinePolicy {
    /// Thompson sampling with a uniform Beta(1, 1) prior.
    NormalTs,
    Ucb1,
    EpsGreedy {
        epsilon: f64,
    },
    Random,
}

impl BaselinePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            BaselinePolicy::NormalTs => "normal-ts",
            BaselinePolicy::Ucb1 => "ucb1",
            BaselinePolicy::EpsGreedy { .. } => "eps-greedy",
            BaselinePolicy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BernoulliArmStats {
    pub pulls: u64,
    pub successes: u64,
}

impl BernoulliArmStats {
    pub fn failures(&self) -> u64 {
        self.pulls - self.successes
    }

    /// Empirical success rate; 0 for an unpulled arm.
    pub fn mean(&self) -> f64 {
        if self.pulls == 0 {
            0.0
        } else {
            self.successes as f64 / self.pulls as f64
        }
    }
}

/// First index of the maximum.
fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Picks the next arm. Ties go to the lowest index.
///
/// # Panics
///
/// If `stats` is empty.
pub fn select_baseline<R: Rng + ?Sized>(
    policy: BaselinePolicy,
    stats: &[BernoulliArmStats],
    rng: &mut R,
) -> usize {
    assert!(!stats.is_empty(), "need at least one arm");
    match policy {
        BaselinePolicy::NormalTs => argmax(stats.iter().map(|s| {
            beta_sample(1.0 + s.successes as f64, 1.0 + s.failures() as f64, rng)
                .expect("posterior parameters are at least 1")
        })),
        BaselinePolicy::Ucb1 => {
            if let Some(cold) = stats.iter().position(|s| s.pulls == 0) {
                return cold;
            }
            let total: u64 = stats.iter().map(|s| s.pulls).sum();
            let log_total = (total as f64).ln();
            argmax(
                stats
                    .iter()
                    .map(|s| s.mean() + (2.0 * log_total / s.pulls as f64).sqrt()),
            )
        }
        BaselinePolicy::EpsGreedy { epsilon } => {
            if rng.random::<f64>() < epsilon {
                rng.random_range(0..stats.len())
            } else {
                argmax(stats.iter().map(BernoulliArmStats::mean))
            }
        }
        BaselinePolicy::Random => rng.random_range(0..stats.len()),
    }
}

pub fn update_baseline(
    stats: &mut [BernoulliArmStats],
    arm: usize,
    reward: bool,
) -> Result<(), BanditError> {
    let s = stats.get_mut(arm).ok_or(BanditError::InvalidArm(arm))?;
    s.pulls += 1;
    s.successes += u64::from(reward);
    Ok(())
}
