//! Synthetic catalogs standing in for a real merchandise feed.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

use super::HarnessError;
use crate::catalog::{Catalog, Item};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_items: usize,
    pub n_categories: usize,
    pub m_feat: usize,
    /// Log-normal location and scale of gmv.
    pub gmv_mu: f64,
    pub gmv_sigma: f64,
    /// Standard deviation of the per-item noise added to the category signature.
    pub noise: f64,
    /// Share of each category labeled ordered, by alignment with a hidden taste vector.
    pub positive_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_items: 100,
            n_categories: 5,
            m_feat: 16,
            gmv_mu: 3.0,
            gmv_sigma: 0.75,
            noise: 0.5,
            positive_fraction: 0.3,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Synth(m));
        if self.n_categories == 0 || self.m_feat == 0 {
            return fail("categories and m_feat must be positive".into());
        }
        if self.n_items < self.n_categories {
            return fail(format!(
                "{} items cannot cover {} categories",
                self.n_items, self.n_categories
            ));
        }
        if !(self.gmv_mu.is_finite() && self.gmv_sigma >= 0.0 && self.gmv_sigma.is_finite()) {
            return fail("gmv_mu must be finite and gmv_sigma nonnegative".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return fail("noise must be nonnegative".into());
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return fail("positive_fraction must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// Item `i` belongs to category `i % M`. Features are the category's random
/// signature plus Gaussian noise. Within every category with at least two
/// items, the top `positive_fraction` (at least one, never all) by alignment
/// of the noise part with a hidden taste vector are ordered, so labels carry
/// no category preference. A lone item is ordered iff its alignment is positive.
pub fn synthesize_catalog<R: Rng + ?Sized>(
    spec: &SynthSpec,
    rng: &mut R,
) -> Result<Catalog, HarnessError> {
    spec.validate()?;
    let (n, m, d) = (spec.n_items, spec.n_categories, spec.m_feat);
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    let signatures: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| normal()).collect()).collect();
    let taste: Vec<f64> = (0..d).map(|_| normal()).collect();
    let gmv_dist = LogNormal::new(spec.gmv_mu, spec.gmv_sigma)
        .map_err(|e| HarnessError::Synth(e.to_string()))?;

    let mut items = Vec::with_capacity(n);
    let mut affinity = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % m;
        let features: Vec<(usize, f64)> = signatures[c]
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let e: f64 = StandardNormal.sample(rng);
                (k, s + spec.noise * e)
            })
            .collect();
        affinity.push(
            features
                .iter()
                .map(|&(k, v)| (v - signatures[c][k]) * taste[k])
                .sum::<f64>(),
        );
        items.push(Item {
            id: format!("item{i:05}"),
            features,
            category: c,
            gmv: gmv_dist.sample(rng),
            ordered: false,
        });
    }

    for c in 0..m {
        let mut members: Vec<usize> = (c..n).step_by(m).collect();
        if members.len() == 1 {
            items[members[0]].ordered = affinity[members[0]] > 0.0;
            continue;
        }
        members.sort_by(|&a, &b| affinity[b].total_cmp(&affinity[a]));
        let k = ((spec.positive_fraction * members.len() as f64).ceil() as usize)
            .clamp(1, members.len() - 1);
        for &i in &members[..k] {
            items[i].ordered = true;
        }
    }

    let categories = (1..=m).map(|c| format!("c{c}")).collect();
    Ok(Catalog::new(categories, d, items)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn synth(n: usize, m: usize, seed: u64) -> Catalog {
        let spec = SynthSpec {
            n_items: n,
            n_categories: m,
            ..SynthSpec::default()
        };
        synthesize_catalog(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn one_item_per_category() {
        let cat = synth(5, 5, 1);
        let sizes: Vec<usize> = cat.items_by_category().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![1; 5]);
    }

    #[test]
    fn balanced_with_positives() {
        let cat = synth(100, 5, 2);
        for members in cat.items_by_category() {
            assert_eq!(members.len(), 20);
            // ceil(0.3 * 20)
            let pos = members.iter().filter(|&&i| cat.items[i].ordered).count();
            assert_eq!(pos, 6);
        }
        let cat = synth(23, 5, 3);
        let sizes: Vec<usize> = cat.items_by_category().iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for members in cat.items_by_category() {
            assert!(members.iter().any(|&i| cat.items[i].ordered));
            assert!(members.iter().any(|&i| !cat.items[i].ordered));
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(synth(40, 4, 9).serialize(), synth(40, 4, 9).serialize());
        assert_ne!(synth(40, 4, 9).serialize(), synth(40, 4, 10).serialize());
    }

    #[test]
    fn infeasible_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for spec in [
            SynthSpec {
                n_items: 4,
                n_categories: 5,
                ..SynthSpec::default()
            },
            SynthSpec {
                n_categories: 0,
                ..SynthSpec::default()
            },
            SynthSpec {
                positive_fraction: 1.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                gmv_sigma: -1.0,
                ..SynthSpec::default()
            },
        ] {
            assert!(matches!(
                synthesize_catalog(&spec, &mut rng),
                Err(HarnessError::Synth(_))
            ));
        }
    }
}
