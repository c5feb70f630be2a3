//! Thompson sampling post-ranker seeded by pre-ranker scores.
//!
//! Each arm (category) holds a beta posterior whose parameters start from
//! the summed normalized scores of its items. Every pull draws one sample
//! per non-empty arm, scales that arm's item scores by `1 + r / theta1`,
//! and serves the best item of the winning arm. Exposure without a click
//! grows `beta` by a damped amount; a click grows `alpha` by the arm's
//! click-to-exposure ratio.

use std::collections::{HashMap, HashSet};

use super::{BanditError, BetaSource};
use crate::catalog::ScoredItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionRule {
    /// Best sampled arm first, then its best adjusted item.
    #[default]
    ArmFirst,
    /// Best adjusted item over all arms.
    GlobalArgmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreUpdate {
    /// Stored scores are multiplied in place every pull.
    #[default]
    Compounding,
    /// Each pull rescales the original pre-ranker score.
    FromBase,
}

impl std::str::FromStr for SelectionRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arm-first" => Ok(Self::ArmFirst),
            "global-argmax" => Ok(Self::GlobalArgmax),
            other => Err(format!("unknown selection_rule `{other}`")),
        }
    }
}

impl std::str::FromStr for ScoreUpdate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compounding" => Ok(Self::Compounding),
            "from-base" => Ok(Self::FromBase),
            other => Err(format!("unknown score_update `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevisedTsConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub scale: f64,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    pub selection_rule: SelectionRule,
    pub score_update: ScoreUpdate,
}

impl Default for RevisedTsConfig {
    fn default() -> Self {
        RevisedTsConfig {
            theta1: 10.0,
            theta2: 1.0,
            theta3: 1.0,
            scale: 10.0,
            prior_alpha: 1.0,
            prior_beta: 1.0,
            selection_rule: SelectionRule::ArmFirst,
            score_update: ScoreUpdate::Compounding,
        }
    }
}

impl RevisedTsConfig {
    pub fn validate(&self) -> Result<(), BanditError> {
        let fields = [
            ("theta1", self.theta1),
            ("theta2", self.theta2),
            ("theta3", self.theta3),
            ("scale", self.scale),
            ("prior_alpha", self.prior_alpha),
            ("prior_beta", self.prior_beta),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(BanditError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Caller-chosen handle, unique within one sampler (catalog index for sessions).
    pub key: usize,
    pub base_score: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub arm: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Mean initial score of the arm, fixed at initialization.
    pub avg: f64,
    unselected: Vec<Candidate>,
    exposed: Vec<usize>,
    clicked: Vec<usize>,
    entered: usize,
}

impl ArmState {
    pub fn unselected(&self) -> &[Candidate] {
        &self.unselected
    }
    /// Exposed and not clicked.
    pub fn exposed(&self) -> &[usize] {
        &self.exposed
    }
    /// Exposed and clicked.
    pub fn clicked(&self) -> &[usize] {
        &self.clicked
    }
    /// Number of candidates that have ever entered this arm.
    pub fn entered(&self) -> usize {
        self.entered
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub key: usize,
    pub arm: usize,
    /// Adjusted score at the time of selection.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct RevisedThompson {
    config: RevisedTsConfig,
    arms: Vec<ArmState>,
    slot: HashMap<usize, usize>,
    pending: HashMap<usize, usize>,
    settled: HashSet<usize>,
}

impl RevisedThompson {
    /// Initializes one arm per category that has at least one scored item.
    pub fn init(scored: &[ScoredItem], config: RevisedTsConfig) -> Result<Self, BanditError> {
        Self::from_candidates(
            scored.iter().map(|s| (s.index, s.category, s.norm_score)),
            config,
        )
    }

    /// Same as [`init`](Self::init) for arbitrary `(key, arm, score)` triples.
    pub fn from_candidates(
        candidates: impl IntoIterator<Item = (usize, usize, f64)>,
        config: RevisedTsConfig,
    ) -> Result<Self, BanditError> {
        config.validate()?;
        let mut by_arm: Vec<(usize, Vec<Candidate>)> = Vec::new();
        let mut seen = HashSet::new();
        for (key, arm, y) in candidates {
            if !(y > 0.0 && y < 1.0) {
                return Err(BanditError::ScoreOutOfRange(y));
            }
            if !seen.insert(key) {
                return Err(BanditError::DuplicateKey(key));
            }
            let c = Candidate {
                key,
                base_score: y,
                score: y,
            };
            match by_arm.iter_mut().find(|(a, _)| *a == arm) {
                Some((_, list)) => list.push(c),
                None => by_arm.push((arm, vec![c])),
            }
        }
        if by_arm.is_empty() {
            return Err(BanditError::NoItems);
        }
        by_arm.sort_by_key(|(a, _)| *a);
        let arms: Vec<ArmState> = by_arm
            .into_iter()
            .map(|(arm, items)| {
                let sum: f64 = items.iter().map(|c| c.base_score).sum();
                let sum_neg: f64 = items.iter().map(|c| 1.0 - c.base_score).sum();
                ArmState {
                    arm,
                    alpha: config.prior_alpha + sum,
                    beta: config.prior_beta + sum_neg,
                    avg: sum / items.len() as f64,
                    entered: items.len(),
                    unselected: items,
                    exposed: Vec::new(),
                    clicked: Vec::new(),
                }
            })
            .collect();
        let slot = arms.iter().enumerate().map(|(i, a)| (a.arm, i)).collect();
        Ok(RevisedThompson {
            config,
            arms,
            slot,
            pending: HashMap::new(),
            settled: HashSet::new(),
        })
    }

    pub fn config(&self) -> &RevisedTsConfig {
        &self.config
    }

    pub fn arms(&self) -> &[ArmState] {
        &self.arms
    }

    pub fn arm(&self, arm: usize) -> Option<&ArmState> {
        self.slot.get(&arm).map(|&i| &self.arms[i])
    }

    /// Selected but not yet given feedback.
    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.arms.iter().all(|a| a.unselected.is_empty())
    }

    /// Adds a fresh candidate to an existing arm without touching its
    /// posterior. Used to model inexhaustible arms.
    pub fn replenish(&mut self, arm: usize, key: usize, score: f64) -> Result<(), BanditError> {
        if !(score > 0.0 && score < 1.0) {
            return Err(BanditError::ScoreOutOfRange(score));
        }
        let &slot = self.slot.get(&arm).ok_or(BanditError::InvalidArm(arm))?;
        let taken = self.pending.contains_key(&key)
            || self.settled.contains(&key)
            || self
                .arms
                .iter()
                .any(|a| a.unselected.iter().any(|c| c.key == key));
        if taken {
            return Err(BanditError::DuplicateKey(key));
        }
        let state = &mut self.arms[slot];
        state.unselected.push(Candidate {
            key,
            base_score: score,
            score,
        });
        state.entered += 1;
        Ok(())
    }

    /// One pull. `None` once every arm is out of candidates.
    pub fn select_next<S: BetaSource + ?Sized>(&mut self, source: &mut S) -> Option<Pick> {
        let theta1 = self.config.theta1;
        let mut best_arm: Option<(usize, f64)> = None;
        for (slot, state) in self.arms.iter_mut().enumerate() {
            if state.unselected.is_empty() {
                continue;
            }
            let r = source.draw_beta(state.alpha, state.beta);
            let factor = 1.0 + r / theta1;
            for c in &mut state.unselected {
                c.score = match self.config.score_update {
                    ScoreUpdate::Compounding => c.score * factor,
                    ScoreUpdate::FromBase => c.base_score * factor,
                };
            }
            if best_arm.is_none_or(|(_, best)| r > best) {
                best_arm = Some((slot, r));
            }
        }
        let (slot, pos) = match self.config.selection_rule {
            SelectionRule::ArmFirst => {
                let (slot, _) = best_arm?;
                (slot, argmax_score(&self.arms[slot].unselected))
            }
            SelectionRule::GlobalArgmax => {
                let mut best: Option<(usize, usize, f64)> = None;
                for (slot, state) in self.arms.iter().enumerate() {
                    if state.unselected.is_empty() {
                        continue;
                    }
                    let pos = argmax_score(&state.unselected);
                    let s = state.unselected[pos].score;
                    if best.is_none_or(|(_, _, b)| s > b) {
                        best = Some((slot, pos, s));
                    }
                }
                let (slot, pos, _) = best?;
                (slot, pos)
            }
        };
        let state = &mut self.arms[slot];
        let c = state.unselected.remove(pos);
        self.pending.insert(c.key, slot);
        Some(Pick {
            key: c.key,
            arm: state.arm,
            score: c.score,
        })
    }

    /// Records exposure of a previously selected candidate.
    pub fn feedback(&mut self, key: usize, clicked: bool) -> Result<(), BanditError> {
        let slot = match self.pending.remove(&key) {
            Some(slot) => slot,
            None if self.settled.contains(&key) => return Err(BanditError::DoubleFeedback(key)),
            None => return Err(BanditError::NotSelected(key)),
        };
        self.settled.insert(key);
        let cfg = &self.config;
        let state = &mut self.arms[slot];
        if clicked {
            state.clicked.push(key);
            let ratio = state.clicked.len() as f64 / state.exposed.len().max(1) as f64;
            state.alpha += state.avg * ratio * cfg.theta3;
        } else {
            state.exposed.push(key);
            let damp = 1.0 - (-(state.exposed.len() as f64) / cfg.scale).exp();
            state.beta += (1.0 - state.avg) * damp * cfg.theta2;
        }
        Ok(())
    }
}

/// First index of the maximal score.
fn argmax_score(items: &[Candidate]) -> usize {
    let mut best = 0;
    for (i, c) in items.iter().enumerate().skip(1) {
        if c.score > items[best].score {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Returns scripted values in turn, cycling.
    struct Scripted(Vec<f64>, usize);

    impl BetaSource for Scripted {
        fn draw_beta(&mut self, _: f64, _: f64) -> f64 {
            let v = self.0[self.1 % self.0.len()];
            self.1 += 1;
            v
        }
    }

    fn scored(index: usize, category: usize, y: f64) -> ScoredItem {
        ScoredItem {
            index,
            category,
            raw_score: y,
            norm_score: y,
        }
    }

    #[test]
    fn init_accumulates_scores() {
        let ts = RevisedThompson::init(
            &[scored(0, 0, 0.5), scored(1, 0, 0.5)],
            RevisedTsConfig::default(),
        )
        .unwrap();
        let a = &ts.arms()[0];
        assert_eq!((a.alpha, a.beta, a.avg), (2.0, 2.0, 0.5));

        let ts = RevisedThompson::init(&[scored(0, 3, 0.999)], RevisedTsConfig::default()).unwrap();
        let a = ts.arm(3).unwrap();
        assert!((a.alpha - 1.999).abs() < 1e-12);
        assert!((a.beta - 1.001).abs() < 1e-12);
        assert!((a.avg - 0.999).abs() < 1e-12);

        assert!(matches!(
            RevisedThompson::init(&[], RevisedTsConfig::default()),
            Err(BanditError::NoItems)
        ));
        assert!(RevisedThompson::init(&[scored(0, 0, 1.0)], RevisedTsConfig::default()).is_err());
    }

    #[test]
    fn empty_arms_are_omitted() {
        let ts = RevisedThompson::init(
            &[scored(0, 0, 0.2), scored(1, 4, 0.7)],
            RevisedTsConfig::default(),
        )
        .unwrap();
        let arms: Vec<usize> = ts.arms().iter().map(|a| a.arm).collect();
        assert_eq!(arms, vec![0, 4]);
    }

    #[test]
    fn forced_choice_and_exhaustion() {
        let mut cfg = RevisedTsConfig::default();
        for theta1 in [0.01, 10.0, 1e6] {
            cfg.theta1 = theta1;
            let mut ts = RevisedThompson::init(&[scored(7, 2, 0.3)], cfg.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(theta1 as u64);
            let pick = ts.select_next(&mut rng).unwrap();
            assert_eq!((pick.key, pick.arm), (7, 2));
            assert!(ts.select_next(&mut rng).is_none());
            assert!(ts.is_exhausted());
        }
    }

    #[test]
    fn stubbed_draws_choose_arm_then_item() {
        let items = [
            scored(0, 0, 0.2),
            scored(1, 0, 0.6),
            scored(2, 0, 0.4),
            scored(3, 1, 0.9),
            scored(4, 1, 0.8),
        ];
        let mut ts = RevisedThompson::init(&items, RevisedTsConfig::default()).unwrap();
        let pick = ts.select_next(&mut Scripted(vec![0.9, 0.1], 0)).unwrap();
        assert_eq!((pick.key, pick.arm), (1, 0));
        assert!((pick.score - 0.6 * 1.09).abs() < 1e-12);
        // untouched arm was still rescaled
        let other = ts.arm(1).unwrap().unselected();
        assert!((other[0].score - 0.9 * 1.01).abs() < 1e-12);

        let cfg = RevisedTsConfig {
            selection_rule: SelectionRule::GlobalArgmax,
            ..RevisedTsConfig::default()
        };
        let mut ts = RevisedThompson::init(&items, cfg).unwrap();
        let pick = ts.select_next(&mut Scripted(vec![0.9, 0.1], 0)).unwrap();
        // 0.9 * 1.01 = 0.909 beats 0.6 * 1.09 = 0.654
        assert_eq!(pick.key, 3);
    }

    #[test]
    fn compounding_versus_from_base() {
        let run = |score_update| {
            let cfg = RevisedTsConfig {
                score_update,
                ..RevisedTsConfig::default()
            };
            let mut ts = RevisedThompson::init(&[scored(0, 0, 0.5)], cfg).unwrap();
            ts.replenish(0, 10, 0.5).unwrap();
            let mut src = Scripted(vec![1.0], 0);
            let first = ts.select_next(&mut src).unwrap();
            let second = ts.select_next(&mut src).unwrap();
            assert_eq!((first.key, second.key), (0, 10));
            second.score
        };
        assert!((run(ScoreUpdate::Compounding) - 0.5 * 1.1 * 1.1).abs() < 1e-12);
        assert!((run(ScoreUpdate::FromBase) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn feedback_arithmetic() {
        let cfg = RevisedTsConfig::default();
        let items: Vec<ScoredItem> = (0..4).map(|i| scored(i, 0, 0.5)).collect();
        let mut ts = RevisedThompson::init(&items, cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let picks: Vec<usize> = (0..4)
            .map(|_| ts.select_next(&mut rng).unwrap().key)
            .collect();

        let b0 = ts.arms()[0].beta;
        ts.feedback(picks[0], false).unwrap();
        let d = ts.arms()[0].beta - b0;
        assert!((d - 0.5 * (1.0 - (-0.1f64).exp())).abs() < 1e-12);
        assert!((d - 0.047_581_290_982_020_2).abs() < 1e-9);

        ts.feedback(picks[1], false).unwrap();
        let a0 = ts.arms()[0].alpha;
        ts.feedback(picks[2], true).unwrap();
        assert!((ts.arms()[0].alpha - a0 - 0.25).abs() < 1e-12);

        assert!(matches!(
            ts.feedback(picks[2], true),
            Err(BanditError::DoubleFeedback(_))
        ));
        assert!(matches!(
            ts.feedback(99, true),
            Err(BanditError::NotSelected(99))
        ));
    }

    #[test]
    fn click_before_any_exposure_uses_guard() {
        let mut ts =
            RevisedThompson::init(&[scored(0, 0, 0.4)], RevisedTsConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let k = ts.select_next(&mut rng).unwrap().key;
        let a0 = ts.arms()[0].alpha;
        ts.feedback(k, true).unwrap();
        let a1 = ts.arms()[0].alpha;
        assert!(a1 > a0);
        assert!((a1 - a0 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn replenish_rejects_reuse() {
        let mut ts =
            RevisedThompson::init(&[scored(0, 0, 0.4)], RevisedTsConfig::default()).unwrap();
        assert!(ts.replenish(0, 0, 0.4).is_err());
        assert!(ts.replenish(5, 1, 0.4).is_err());
        assert!(ts.replenish(0, 1, 1.5).is_err());
        ts.replenish(0, 1, 0.4).unwrap();
        assert_eq!(ts.arms()[0].entered(), 2);
    }
}
