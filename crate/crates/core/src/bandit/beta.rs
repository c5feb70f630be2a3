use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::BanditError;

/// Source of Beta draws. Any [`Rng`] is one; tests substitute scripted values.
pub trait BetaSource {
    fn draw_beta(&mut self, alpha: f64, beta: f64) -> f64;
}

impl<R: Rng + ?Sized> BetaSource for R {
    fn draw_beta(&mut self, alpha: f64, beta: f64) -> f64 {
        beta_sample(alpha, beta, self).expect("beta parameters must be positive")
    }
}

/// One draw from `Beta(alpha, beta)`, kept strictly inside (0, 1).
pub fn beta_sample<R: Rng + ?Sized>(
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<f64, BanditError> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(BanditError::InvalidBeta { alpha, beta });
    }
    let dist = Beta::new(alpha, beta).map_err(|_| BanditError::InvalidBeta { alpha, beta })?;
    let x = dist.sample(rng);
    Ok(x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}
