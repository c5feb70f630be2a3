//! Oracles shared by the integration suites.
#![allow(dead_code)]

use dynrank::catalog::{Catalog, Item};
use dynrank::pretrain::{pair_gradient, pair_sample_loss, MlpParams, PairSample};
use rand::Rng;

pub fn random_item<R: Rng>(id: usize, m: usize, rng: &mut R) -> Item {
    let mut features = Vec::new();
    for k in 0..m {
        if rng.random_bool(0.7) {
            features.push((k, rng.random_range(-2.0..2.0)));
        }
    }
    Item {
        id: format!("i{id}"),
        features,
        category: 0,
        gmv: rng.random_range(0.0..100.0),
        ordered: id.is_multiple_of(2),
    }
}

/// Central differences, step 1e-5, against the analytic pair gradient.
pub fn max_relative_error(params: &MlpParams, pair: &PairSample<'_>, margin: f64) -> f64 {
    let analytic = pair_gradient(params, pair, margin).unwrap();
    let base = params.params();
    assert_eq!(analytic.len(), base.len());
    let h = 1e-5;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut v = base.clone();
        v[i] = base[i] + h;
        probe.set_params(&v);
        let up = pair_sample_loss(&probe, pair, margin).unwrap();
        v[i] = base[i] - h;
        probe.set_params(&v);
        let down = pair_sample_loss(&probe, pair, margin).unwrap();
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

pub fn separable_catalog<R: Rng>(rng: &mut R) -> Catalog {
    let items = (0..40)
        .map(|i| {
            let ordered = i < 20;
            let f0 = if ordered {
                rng.random_range(2.0..3.0)
            } else {
                rng.random_range(-3.0..-2.0)
            };
            Item {
                id: format!("s{i}"),
                features: vec![(0, f0), (1, rng.random_range(-0.5..0.5))],
                category: 0,
                gmv: rng.random_range(1.0..50.0),
                ordered,
            }
        })
        .collect();
    Catalog::new(vec!["all".into()], 2, items).unwrap()
}
