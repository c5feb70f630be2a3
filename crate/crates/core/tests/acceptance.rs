//! One PASS/FAIL line per acceptance criterion. Lines go straight to stdout
//! so they show up without `--nocapture`.

mod common;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use common::{max_relative_error, random_item, separable_catalog};
use dynrank::bandit::{beta_sample, BetaSource, RevisedThompson, RevisedTsConfig};
use dynrank::harness::{self, read_csv, ExperimentConfig, Mode, PageComparisonRecord};
use dynrank::metrics::{dcg, page_dcg, PagedList, RankedEntry, RankedList};
use dynrank::pretrain::{generate_pairs, train, LambdaMode, MlpParams, PairSample, TrainConfig};
use dynrank::sim::{run_case_study, CasePolicy, ClickModel, RoundLog, DEFAULT_OFFSETS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNS: u64 = 10;
const ROUNDS: u64 = 10_000;
const SEED: u64 = 42;

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "[{tag}] {id}. {name}: {detail}");
        if !pass {
            self.failures.push(format!("{id}. {name}"));
        }
    }

    fn info(&self, text: String) {
        let _ = writeln!(std::io::stdout().lock(), "       {text}");
    }
}

/// Per-seed value of `metric` at `round` for one policy, seeds in order.
fn at_round(logs: &[RoundLog], policy: &str, round: u64, metric: fn(&RoundLog) -> f64) -> Vec<f64> {
    logs.iter()
        .filter(|l| l.policy == policy && l.round == round)
        .map(metric)
        .collect()
}

fn reward(l: &RoundLog) -> f64 {
    l.cum_reward as f64
}

fn regret(l: &RoundLog) -> f64 {
    l.cum_regret
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn paired(a: &[f64], b: &[f64], strict: bool) -> usize {
    a.iter()
        .zip(b)
        .filter(|(x, y)| if strict { x > y } else { x >= y })
        .count()
}

fn case_study(r: &mut Report) {
    let model = ClickModel::default_fixture();
    let policies = CasePolicy::standard_set();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let logs = pool
        .install(|| run_case_study(&model, &policies, ROUNDS, RUNS, SEED))
        .unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let final_reward = |p: &str| at_round(&logs, p, ROUNDS, reward);
    let (rev, nts, ucb, eps, rnd) = (
        final_reward("revised-ts"),
        final_reward("normal-ts"),
        final_reward("ucb1"),
        final_reward("eps-greedy"),
        final_reward("random"),
    );
    let checks = [
        (
            "revised-ts >= normal-ts",
            paired(&rev, &nts, false),
            mean(&rev) >= mean(&nts),
        ),
        (
            "revised-ts >= ucb1",
            paired(&rev, &ucb, false),
            mean(&rev) >= mean(&ucb),
        ),
        (
            "normal-ts > eps-greedy",
            paired(&nts, &eps, true),
            mean(&nts) > mean(&eps),
        ),
        (
            "eps-greedy > random",
            paired(&eps, &rnd, true),
            mean(&eps) > mean(&rnd),
        ),
    ];
    let ok = checks.iter().all(|(_, wins, means)| *wins >= 8 && *means) && elapsed < 30.0;
    let detail = checks
        .iter()
        .map(|(name, wins, _)| format!("{name} {wins}/10"))
        .collect::<Vec<_>>()
        .join(", ");
    r.line(
        1,
        "case-study ordering",
        ok,
        format!("{detail}; {elapsed:.2}s on one thread"),
    );
    r.info(format!(
        "mean reward at {ROUNDS}: revised {:.1}, normal {:.1}, ucb1 {:.1}, eps {:.1}, random {:.1}",
        mean(&rev),
        mean(&nts),
        mean(&ucb),
        mean(&eps),
        mean(&rnd)
    ));
    let plain = run_case_study(
        &model,
        &[CasePolicy::RevisedTs {
            config: RevisedTsConfig::default(),
            offsets: Vec::new(),
        }],
        ROUNDS,
        RUNS,
        SEED,
    )
    .unwrap();
    let plain_rev = at_round(&plain, "revised-ts", ROUNDS, reward);
    r.info(format!(
        "without personalization offsets revised-ts >= normal-ts on {}/10 seeds (mean {:.1})",
        paired(&plain_rev, &nts, false),
        mean(&plain_rev)
    ));

    let rev500 = mean(&at_round(&logs, "revised-ts", 500, regret));
    let nts500 = mean(&at_round(&logs, "normal-ts", 500, regret));
    r.line(
        2,
        "faster convergence with personalization",
        rev500 < nts500,
        format!(
            "regret@500 revised {rev500:.3} vs normal {nts500:.3} (offsets {DEFAULT_OFFSETS:?})"
        ),
    );

    let mut ok = true;
    let mut parts = Vec::new();
    for p in ["ucb1", "normal-ts", "revised-ts"] {
        let r1k = mean(&at_round(&logs, p, 1_000, regret));
        let r10k = mean(&at_round(&logs, p, 10_000, regret));
        ok &= r10k < 10.0 * r1k;
        parts.push(format!("{p} {r1k:.2} -> {r10k:.2}"));
    }
    r.line(3, "regret sublinearity", ok, parts.join(", "));
}

struct Fixed(f64);

impl BetaSource for Fixed {
    fn draw_beta(&mut self, _: f64, _: f64) -> f64 {
        self.0
    }
}

fn algorithm_arithmetic(r: &mut Report) {
    let tol = 1e-9;
    let cfg = RevisedTsConfig::default();
    let init = RevisedThompson::from_candidates([(0, 0, 0.5), (1, 0, 0.5)], cfg.clone()).unwrap();
    let a = init.arm(0).unwrap();
    let init_ok =
        (a.alpha - 2.0).abs() < tol && (a.beta - 2.0).abs() < tol && (a.avg - 0.5).abs() < tol;

    // four items at y = 0.5: one miss with E empty, a second miss, then a click with |E| = 2
    let mut ts = RevisedThompson::from_candidates((0..4).map(|k| (k, 0, 0.5)), cfg).unwrap();
    let mut src = Fixed(0.5);
    let p0 = ts.select_next(&mut src).unwrap();
    let b0 = ts.arm(0).unwrap().beta;
    ts.feedback(p0.key, false).unwrap();
    let d_beta = ts.arm(0).unwrap().beta - b0;
    let p1 = ts.select_next(&mut src).unwrap();
    ts.feedback(p1.key, false).unwrap();
    let p2 = ts.select_next(&mut src).unwrap();
    let a0 = ts.arm(0).unwrap().alpha;
    ts.feedback(p2.key, true).unwrap();
    let d_alpha = ts.arm(0).unwrap().alpha - a0;

    let beta_ok = (d_beta - 0.047_581_290_982_020_24).abs() < tol;
    let alpha_ok = (d_alpha - 0.25).abs() < tol;
    r.line(
        4,
        "update arithmetic",
        init_ok && beta_ok && alpha_ok,
        format!(
            "init ({}, {}, {}), d_beta {d_beta:.12}, d_alpha {d_alpha:.12}",
            a.alpha, a.beta, a.avg
        ),
    );
}

fn beta_moments(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in [(1.0, 1.0), (50.0, 50.0), (2.0, 8.0)] {
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| beta_sample(a, b, &mut rng).unwrap())
            .collect();
        let m = mean(&draws);
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let (tm, tv) = (a / (a + b), a * b / ((a + b).powi(2) * (a + b + 1.0)));
        let rel = (v - tv).abs() / tv;
        ok &= (m - tm).abs() <= 0.005 && rel <= 0.15;
        parts.push(format!(
            "({a},{b}) mean {m:.4}/{tm:.4} var rel err {:.2}%",
            100.0 * rel
        ));
    }
    r.line(5, "beta sampler moments", ok, parts.join(", "));
}

fn pretrainer(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (m, margin) = (5, 1.0);
    let mut worst = 0.0f64;
    let mut points = 0;
    while points < 10 {
        let params = MlpParams::init_uniform(m, &[6, 4], 0.5, &mut rng);
        let pos = random_item(0, m, &mut rng);
        let neg = random_item(1, m, &mut rng);
        let pair = PairSample {
            pos: &pos,
            neg: &neg,
            weight: rng.random_range(0.5..3.0),
        };
        let diff = params.forward(&pos.features).unwrap() - params.forward(&neg.features).unwrap();
        if (margin - diff).abs() < 1e-3 {
            continue;
        }
        worst = worst.max(max_relative_error(&params, &pair, margin));
        points += 1;
    }
    let catalog = separable_catalog(&mut rng);
    let pairs = generate_pairs(&catalog, 800, LambdaMode::LogGmv, &mut rng).unwrap();
    let trained = train(
        &pairs,
        2,
        &TrainConfig {
            epochs: 30,
            seed: SEED,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let first = trained.loss_curve[0];
    let last = *trained.loss_curve.last().unwrap();
    let reduction = 1.0 - last / first;
    r.line(
        6,
        "gradient check and separable training",
        worst < 1e-4 && reduction >= 0.95,
        format!("max rel err {worst:.2e} over 10 points, loss {first:.4} -> {last:.6} ({:.2}% reduction)", 100.0 * reduction),
    );
}

fn dcg_oracles(r: &mut Report) {
    let entries = |v: &[(f64, bool)]| -> RankedList { v.iter().copied().collect() };
    let mut page = vec![(0.0, false); 10];
    page[1] = (20.0, true);
    page[8] = (99.0, true);
    let paged = PagedList {
        pages: vec![
            entries(&page),
            entries(&[(7.0, true), (3.0, false), (1.0, true), (1.0, false)]),
        ],
    };
    let hand = [
        (dcg(&RankedList::default()), 0.0),
        (dcg(&entries(&[(10.0, true)])), 10.0),
        (
            dcg(&entries(&[(10.0, true), (20.0, true), (5.0, false)])),
            22.618_595_071_429_148,
        ),
        (page_dcg(&paged, 0, 8).unwrap(), 12.618_595_071_429_15),
        (page_dcg(&paged, 1, 1).unwrap(), 7.0),
        (
            page_dcg(
                &PagedList {
                    pages: vec![entries(&[(5.0, false); 4])],
                },
                0,
                8,
            )
            .unwrap(),
            0.0,
        ),
    ];
    let exact = hand
        .iter()
        .all(|(got, want)| (got - want).abs() <= 1e-12 * want.max(1.0));

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut violations = 0;
    let mut trials = 0;
    while trials < 1000 {
        let n = rng.random_range(2..25);
        let mut list: Vec<RankedEntry> = (0..n)
            .map(|_| RankedEntry {
                gmv: rng.random_range(0.0..300.0),
                ordered: rng.random_bool(0.4),
            })
            .collect();
        let Some(late) = list.iter().rposition(|e| e.ordered) else {
            continue;
        };
        let Some(early) = list[..late].iter().position(|e| !e.ordered) else {
            continue;
        };
        let before = dcg(&RankedList::new(list.clone()));
        list.swap(early, late);
        if dcg(&RankedList::new(list)) < before - 1e-12 {
            violations += 1;
        }
        trials += 1;
    }
    r.line(
        7,
        "dcg and page-dcg oracles",
        exact && violations == 0,
        format!(
            "{} hand values exact: {exact}; monotonicity violations {violations}/1000",
            hand.len()
        ),
    );
}

fn pipeline_lift(r: &mut Report, dir: &Path) {
    let mut cfg = ExperimentConfig::defaults(Mode::Pipeline);
    cfg.out_dir = dir.join("pipeline");
    harness::run(&cfg).unwrap();
    let cmp: Vec<PageComparisonRecord> =
        read_csv(&cfg.out_dir.join("page_comparison.csv")).unwrap();
    let mid = &cmp[1..=3];
    let lift = mid.iter().all(|c| c.mean_diff > 0.0 && c.p_value < 0.01);
    let min_mid = mid
        .iter()
        .map(|c| c.mean_diff)
        .fold(f64::INFINITY, f64::min);
    let shrinks = cmp[7].mean_diff < min_mid;
    let detail = cmp
        .iter()
        .map(|c| format!("{} {:+.1} (p={:.0e})", c.page, c.mean_diff, c.p_value))
        .collect::<Vec<_>>()
        .join(", ");
    r.line(
        8,
        "pipeline mid-page lift",
        lift && shrinks,
        format!("{} sessions; {detail}", cfg.sessions),
    );
}

fn determinism(r: &mut Report, dir: &Path) {
    let mut ok = true;
    let mut parts = Vec::new();
    for mode in [Mode::Train, Mode::Score, Mode::CaseStudy, Mode::Pipeline] {
        let runs: Vec<_> = ["a", "b"]
            .iter()
            .map(|tag| {
                let mut cfg = ExperimentConfig::defaults(mode);
                cfg.out_dir = dir.join(format!("{}-{tag}", mode.name()));
                harness::run(&cfg).unwrap()
            })
            .collect();
        let same_manifest = runs[0].manifest == runs[1].manifest;
        let same_bytes = runs[0].manifest.artifacts.iter().all(|(name, _)| {
            fs::read(runs[0].out_dir.join(name)).unwrap()
                == fs::read(runs[1].out_dir.join(name)).unwrap()
        });
        let same_file = fs::read(runs[0].out_dir.join(harness::MANIFEST_NAME)).unwrap()
            == fs::read(runs[1].out_dir.join(harness::MANIFEST_NAME)).unwrap();
        ok &= same_manifest && same_bytes && same_file;
        parts.push(format!(
            "{} {} artifacts",
            mode.name(),
            runs[0].manifest.artifacts.len()
        ));
    }
    r.line(9, "determinism", ok, parts.join(", "));
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = Report {
        failures: Vec::new(),
    };
    case_study(&mut r);
    algorithm_arithmetic(&mut r);
    beta_moments(&mut r);
    pretrainer(&mut r);
    dcg_oracles(&mut r);
    pipeline_lift(&mut r, dir.path());
    determinism(&mut r, dir.path());
    assert!(r.failures.is_empty(), "failed: {:?}", r.failures);
}
