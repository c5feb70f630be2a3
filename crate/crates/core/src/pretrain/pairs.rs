use rand::Rng;

use super::TrainError;
use crate::catalog::{Catalog, Item};

/// How each pair's loss is weighted by the merchandise value involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaMode {
    Uniform,
    /// `1 + ln(1 + max(gmv_pos, gmv_neg))`
    #[default]
    LogGmv,
}

impl std::str::FromStr for LambdaMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(LambdaMode::Uniform),
            "log-gmv" => Ok(LambdaMode::LogGmv),
            other => Err(format!("unknown lambda mode `{other}` (uniform | log-gmv)")),
        }
    }
}

/// One ordered item paired with one unordered item.
#[derive(Debug, Clone, Copy)]
pub struct PairSample<'a> {
    pub pos: &'a Item,
    pub neg: &'a Item,
    pub weight: f64,
}

pub fn pair_weight(pos: &Item, neg: &Item, mode: LambdaMode) -> f64 {
    match mode {
        LambdaMode::Uniform => 1.0,
        LambdaMode::LogGmv => 1.0 + pos.gmv.max(neg.gmv).ln_1p(),
    }
}

/// Weighted hinge term `weight * max(0, margin - (y1 - y2)(t1 - t2))`.
pub fn pair_loss(y1: f64, y2: f64, t1: u8, t2: u8, margin: f64, weight: f64) -> f64 {
    debug_assert_eq!(t1 + t2, 1, "exactly one member of a pair is positive");
    let signed = (y1 - y2) * (f64::from(t1) - f64::from(t2));
    weight * (margin - signed).max(0.0)
}

/// Samples `count` pairs, each positive and negative drawn uniformly.
pub fn generate_pairs<'a, R: Rng + ?Sized>(
    catalog: &'a Catalog,
    count: usize,
    mode: LambdaMode,
    rng: &mut R,
) -> Result<Vec<PairSample<'a>>, TrainError> {
    let (pos, neg): (Vec<&Item>, Vec<&Item>) = catalog.items.iter().partition(|it| it.ordered);
    if pos.is_empty() || neg.is_empty() {
        return Err(TrainError::MissingClass {
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    Ok((0..count)
        .map(|_| {
            let p = pos[rng.random_range(0..pos.len())];
            let n = neg[rng.random_range(0..neg.len())];
            PairSample {
                pos: p,
                neg: n,
                weight: pair_weight(p, n, mode),
            }
        })
        .collect())
}
