use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::bandit::beta_sample;

/// Draws used to estimate each arm's click probability.
pub const CLICK_PROB_DRAWS: usize = 1_000_000;
const CLICK_PROB_SEED: u64 = 0x00c1_1c4b_ea7a;

/// Threshold click model: a pull of arm `c` draws `f ~ Beta(a_c, b_c)` and
/// clicks when `f >= threshold`.
#[derive(Debug, Clone)]
pub struct ClickModel {
    arm_params: Vec<(f64, f64)>,
    threshold: f64,
    click_probs: OnceLock<Vec<f64>>,
}

impl ClickModel {
    pub fn new(arm_params: Vec<(f64, f64)>, threshold: f64) -> Result<Self, SimError> {
        if arm_params.is_empty() {
            return Err(SimError::Invalid(
                "click model needs at least one arm".into(),
            ));
        }
        if let Some(&(a, b)) = arm_params
            .iter()
            .find(|(a, b)| !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()))
        {
            return Err(SimError::Invalid(format!(
                "arm parameters must be positive, got ({a}, {b})"
            )));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(SimError::Invalid(format!(
                "threshold {threshold} outside [0, 1]"
            )));
        }
        Ok(ClickModel {
            arm_params,
            threshold,
            click_probs: OnceLock::new(),
        })
    }

    /// Five arms with one clear winner and three near-tied middle arms.
    pub fn default_fixture() -> Self {
        Self::new(
            vec![(6.0, 2.0), (4.0, 4.0), (2.0, 6.0), (3.0, 3.0), (5.0, 5.0)],
            0.5,
        )
        .expect("fixture is valid")
    }

    pub fn num_arms(&self) -> usize {
        self.arm_params.len()
    }

    pub fn arm_params(&self) -> &[(f64, f64)] {
        &self.arm_params
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn params(&self, arm: usize) -> Result<(f64, f64), SimError> {
        self.arm_params
            .get(arm)
            .copied()
            .ok_or(SimError::InvalidArm(arm))
    }

    pub fn simulate_click<R: Rng + ?Sized>(
        &self,
        arm: usize,
        rng: &mut R,
    ) -> Result<bool, SimError> {
        let (a, b) = self.params(arm)?;
        let f_item = beta_sample(a, b, rng)?;
        Ok(f_item >= self.threshold)
    }

    /// Monte Carlo estimate of `P(f >= threshold)`, computed once per model.
    pub fn arm_click_prob(&self, arm: usize) -> Result<f64, SimError> {
        self.params(arm)?;
        Ok(self.click_probs()[arm])
    }

    pub fn click_probs(&self) -> &[f64] {
        self.click_probs.get_or_init(|| {
            self.arm_params
                .iter()
                .enumerate()
                .map(|(arm, &(a, b))| {
                    let mut rng = ChaCha8Rng::seed_from_u64(CLICK_PROB_SEED + arm as u64);
                    let hits = (0..CLICK_PROB_DRAWS)
                        .filter(|_| {
                            beta_sample(a, b, &mut rng).expect("validated") >= self.threshold
                        })
                        .count();
                    hits as f64 / CLICK_PROB_DRAWS as f64
                })
                .collect()
        })
    }

    /// Index and click probability of the best arm (lowest index on ties).
    pub fn best_arm(&self) -> (usize, f64) {
        let probs = self.click_probs();
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        (best, probs[best])
    }
}
