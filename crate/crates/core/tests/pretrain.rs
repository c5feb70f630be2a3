mod common;

use common::{max_relative_error, random_item, separable_catalog};
use dynrank::catalog::Item;
use dynrank::pretrain::{
    generate_pairs, pair_gradient, train, LambdaMode, MlpParams, PairSample, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_finite_differences_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let m = 5;
    let mut checked = 0;
    while checked < 10 {
        let params = MlpParams::init_uniform(m, &[6, 4], 0.5, &mut rng);
        let pos = random_item(0, m, &mut rng);
        let neg = random_item(1, m, &mut rng);
        let pair = PairSample {
            pos: &pos,
            neg: &neg,
            weight: rng.random_range(0.5..3.0),
        };
        let margin = 1.0;
        let diff = params.forward(&pos.features).unwrap() - params.forward(&neg.features).unwrap();
        // stay clear of the hinge kink, where the gradient is not defined
        if (margin - diff).abs() < 1e-3 {
            continue;
        }
        let err = max_relative_error(&params, &pair, margin);
        assert!(err < 1e-4, "point {checked}: max relative error {err}");
        checked += 1;
    }
}

#[test]
fn satisfied_margin_has_zero_gradient() {
    let mut params = MlpParams::zeros(1, &[]);
    params.set_params(&[10.0, 0.0]);
    let pos = Item {
        id: "p".into(),
        features: vec![(0, 1.0)],
        category: 0,
        gmv: 1.0,
        ordered: true,
    };
    let neg = Item {
        id: "n".into(),
        features: vec![],
        category: 0,
        gmv: 1.0,
        ordered: false,
    };
    let pair = PairSample {
        pos: &pos,
        neg: &neg,
        weight: 1.0,
    };
    assert!(pair_gradient(&params, &pair, 1.0)
        .unwrap()
        .iter()
        .all(|&g| g == 0.0));
}

#[test]
fn separable_fixture_loss_drops_by_95_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let catalog = separable_catalog(&mut rng);
    let pairs = generate_pairs(&catalog, 800, LambdaMode::LogGmv, &mut rng).unwrap();
    let trained = train(
        &pairs,
        2,
        &TrainConfig {
            epochs: 30,
            seed: 3,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let first = trained.loss_curve[0];
    let last = *trained.loss_curve.last().unwrap();
    assert!(last <= 0.05 * first, "{first} -> {last}");
}

#[test]
fn training_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let catalog = separable_catalog(&mut rng);
    let pairs = generate_pairs(&catalog, 100, LambdaMode::Uniform, &mut rng).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let a = train(&pairs, 2, &cfg).unwrap();
    let b = train(&pairs, 2, &cfg).unwrap();
    assert_eq!(a.params.to_text(), b.params.to_text());
    assert_eq!(a.loss_curve, b.loss_curve);
}
