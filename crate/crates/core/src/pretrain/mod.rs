//! Pairwise learning-to-rank pre-ranker.
//!
//! A pair `(pos, neg)` is scored by two forward passes through one shared
//! [`MlpParams`]; the weighted hinge on the score difference is minimized
//! with mini-batch SGD.

mod mlp;
mod pairs;

pub use mlp::{Dense, MlpParams, DEFAULT_HIDDEN, PARAMS_MAGIC, PARAMS_VERSION};
pub use pairs::{generate_pairs, pair_loss, pair_weight, LambdaMode, PairSample};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::{normalize_scores, Catalog, CatalogError, ScoredItem};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("feature index {index} out of range for input dimension {expected}")]
    DimensionMismatch { expected: usize, index: usize },
    #[error("pair generation needs both classes ({positives} positives, {negatives} negatives)")]
    MissingClass { positives: usize, negatives: usize },
    #[error("no training pairs")]
    NoPairs,
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("params format: {0}")]
    Format(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lambda: LambdaMode,
    pub hidden: Vec<usize>,
    /// Initial weights are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 1.0,
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            lambda: LambdaMode::LogGmv,
            hidden: DEFAULT_HIDDEN.to_vec(),
            init_scale: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.init_scale >= 0.0) {
            return bad("init_scale must be nonnegative");
        }
        Ok(())
    }

    /// Parameters before any training step.
    pub fn initial_params(&self, m_feat: usize) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        MlpParams::init_uniform(m_feat, &self.hidden, self.init_scale, &mut rng)
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: MlpParams,
    /// Mean weighted pair loss over all pairs: entry 0 before training,
    /// entry `e` after epoch `e`.
    pub loss_curve: Vec<f64>,
}

/// Weighted hinge loss of one pair, evaluating both members with `params`.
pub fn pair_sample_loss(
    params: &MlpParams,
    pair: &PairSample<'_>,
    margin: f64,
) -> Result<f64, TrainError> {
    let y1 = params.forward(&pair.pos.features)?;
    let y2 = params.forward(&pair.neg.features)?;
    Ok(pair_loss(y1, y2, 1, 0, margin, pair.weight))
}

pub fn mean_loss(
    params: &MlpParams,
    pairs: &[PairSample<'_>],
    margin: f64,
) -> Result<f64, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    let mut total = 0.0;
    for p in pairs {
        total += pair_sample_loss(params, p, margin)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Adds the gradient of one pair's loss, times `scale`, into `grad`.
/// Returns the pair's loss.
pub(crate) fn accumulate_pair_gradient(
    params: &MlpParams,
    pair: &PairSample<'_>,
    margin: f64,
    scale: f64,
    grad: &mut MlpParams,
) -> Result<f64, TrainError> {
    let pos = params.trace(&pair.pos.features)?;
    let neg = params.trace(&pair.neg.features)?;
    let slack = margin - (pos.output() - neg.output());
    if slack <= 0.0 {
        return Ok(0.0);
    }
    let upstream = scale * pair.weight;
    params.backward(&pair.pos.features, &pos, -upstream, grad);
    params.backward(&pair.neg.features, &neg, upstream, grad);
    Ok(pair.weight * slack)
}

/// Gradient of one pair's loss with respect to every parameter, in
/// [`MlpParams::params`] order.
pub fn pair_gradient(
    params: &MlpParams,
    pair: &PairSample<'_>,
    margin: f64,
) -> Result<Vec<f64>, TrainError> {
    let mut grad = params.zeros_like();
    accumulate_pair_gradient(params, pair, margin, 1.0, &mut grad)?;
    Ok(grad.params())
}

/// Mini-batch SGD on the mean weighted pair loss.
pub fn train(
    pairs: &[PairSample<'_>],
    m_feat: usize,
    config: &TrainConfig,
) -> Result<Trained, TrainError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    let mut params = config.initial_params(m_feat);
    let mut loss_curve = vec![mean_loss(&params, pairs, config.margin)?];
    // Shuffling uses its own stream so the init draw stays independent of `epochs`.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut grad = params.zeros_like();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.for_each_param_mut(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                accumulate_pair_gradient(&params, &pairs[i], config.margin, scale, &mut grad)?;
            }
            params.add_scaled(&grad, -config.learning_rate);
        }
        let loss = mean_loss(&params, pairs, config.margin)?;
        if !loss.is_finite() || !params.is_finite() {
            return Err(TrainError::Diverged { epoch, loss });
        }
        loss_curve.push(loss);
    }
    Ok(Trained { params, loss_curve })
}

/// Scores every catalog item; normalization spans the whole catalog.
pub fn score_catalog(params: &MlpParams, catalog: &Catalog) -> Result<Vec<ScoredItem>, TrainError> {
    if params.input_dim() != catalog.m_feat {
        return Err(TrainError::DimensionMismatch {
            expected: params.input_dim(),
            index: catalog.m_feat,
        });
    }
    let raw = catalog
        .items
        .iter()
        .map(|it| params.forward(&it.features))
        .collect::<Result<Vec<_>, _>>()?;
    let norm = normalize_scores(&raw)?;
    Ok(catalog
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| ScoredItem {
            index: i,
            category: it.category,
            raw_score: raw[i],
            norm_score: norm[i],
        })
        .collect())
}
