//! The run modes. Each writes its artifacts plus a manifest into the output
//! directory.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{CatalogSource, ExperimentConfig, Mode};
use super::io::{
    read_csv, read_manifest, sha256_hex, write_bytes, write_csv, CaseAggregateRecord, LossRecord,
    Manifest, PageComparisonRecord, PageDcgRecord, ScoreRecord, SessionRecord, MANIFEST_NAME,
};
use super::synth::synthesize_catalog;
use super::HarnessError;
use crate::catalog::{load_catalog, Catalog, ScoredItem};
use crate::metrics::{
    aggregate, mean_stderr, page_dcg, sign_test_p, PagedList, RankedEntry, RankedList,
};
use crate::pretrain::{generate_pairs, score_catalog, train, MlpParams, Trained};
use crate::sim::{
    run_case_study, run_seed, run_session, ClickModel, RoundLog, SessionEntry, SessionPolicy,
    UserProfile,
};

const STREAM_CATALOG: u64 = 10;
const STREAM_PAIRS: u64 = 11;
const STREAM_SESSION: u64 = 12;
const STREAM_INTENT: u64 = 13;

/// `preferred = random` draws one preferred category per session.
pub const RANDOM_INTENT: &str = "random";

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Human-readable result lines.
    pub lines: Vec<String>,
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<(String, String)>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn csv<T: serde::Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), HarnessError> {
        let hash = write_csv(&self.dir.join(name), rows)?;
        self.artifacts.push((name.to_string(), hash));
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), HarnessError> {
        let hash = write_bytes(&self.dir.join(name), text.as_bytes())?;
        self.artifacts.push((name.to_string(), hash));
        Ok(())
    }
}

pub fn page_label(page: usize) -> String {
    format!("Page-{page}")
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn build_catalog(cfg: &ExperimentConfig) -> Result<Catalog, HarnessError> {
    match &cfg.catalog {
        CatalogSource::File(path) => {
            let f = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
            Ok(load_catalog(BufReader::new(f))?)
        }
        CatalogSource::Synth(spec) => synthesize_catalog(spec, &mut rng(cfg.seed, STREAM_CATALOG)),
    }
}

fn fit(cfg: &ExperimentConfig, catalog: &Catalog) -> Result<Trained, HarnessError> {
    let pairs = generate_pairs(
        catalog,
        cfg.pairs,
        cfg.train.lambda,
        &mut rng(cfg.seed, STREAM_PAIRS),
    )?;
    Ok(train(&pairs, catalog.m_feat, &cfg.train)?)
}

fn params_for(cfg: &ExperimentConfig, catalog: &Catalog) -> Result<MlpParams, HarnessError> {
    match &cfg.params_path {
        Some(path) => Ok(MlpParams::from_text(&read_file(path)?)?),
        None => Ok(fit(cfg, catalog)?.params),
    }
}

fn score_records(catalog: &Catalog, scored: &[ScoredItem]) -> Vec<ScoreRecord> {
    scored
        .iter()
        .map(|s| ScoreRecord {
            item_id: catalog.items[s.index].id.clone(),
            category: catalog.categories[s.category].clone(),
            raw_score: s.raw_score,
            norm_score: s.norm_score,
        })
        .collect()
}

/// Executes `cfg.mode`, writing artifacts under `cfg.out_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let mut out = Output::create(&cfg.out_dir)?;
    let lines = match cfg.mode {
        Mode::Train => run_train(cfg, &mut out)?,
        Mode::Score => run_score(cfg, &mut out)?,
        Mode::CaseStudy => run_case(cfg, &mut out)?,
        Mode::Pipeline => run_pipeline(cfg, &mut out)?,
    };
    let manifest = Manifest {
        mode: cfg.mode.name().to_string(),
        seed: cfg.seed,
        config_sha256: sha256_hex(cfg.canonical().as_bytes()),
        artifacts: out.artifacts.clone(),
    };
    write_bytes(&out.dir.join(MANIFEST_NAME), manifest.to_text().as_bytes())?;
    Ok(RunSummary {
        mode: cfg.mode,
        out_dir: out.dir,
        manifest,
        lines,
    })
}

fn run_train(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<String>, HarnessError> {
    let catalog = build_catalog(cfg)?;
    let trained = fit(cfg, &catalog)?;
    out.text("catalog.tsv", &catalog.serialize())?;
    out.text("mlp_params.txt", &trained.params.to_text())?;
    let curve: Vec<LossRecord> = trained
        .loss_curve
        .iter()
        .enumerate()
        .map(|(epoch, &loss)| LossRecord { epoch, loss })
        .collect();
    out.csv("loss_curve.csv", &curve)?;
    let first = trained.loss_curve[0];
    let last = *trained
        .loss_curve
        .last()
        .expect("curve has the initial entry");
    Ok(vec![
        format!(
            "trained {} params on {} items, {} pairs",
            trained.params.num_params(),
            catalog.items.len(),
            cfg.pairs
        ),
        format!(
            "loss {first:.6} -> {last:.6} after {} epochs",
            cfg.train.epochs
        ),
    ])
}

fn run_score(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<String>, HarnessError> {
    let catalog = build_catalog(cfg)?;
    let params = params_for(cfg, &catalog)?;
    let scored = score_catalog(&params, &catalog)?;
    out.csv("scores.csv", &score_records(&catalog, &scored))?;
    Ok(vec![format!("scored {} items", scored.len())])
}

fn run_case(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<String>, HarnessError> {
    let model = ClickModel::new(cfg.click_arms.clone(), cfg.click_threshold)?;
    let policies: Vec<_> = cfg.policies.iter().map(|b| b.to_case_policy()).collect();
    let logs = run_case_study(&model, &policies, cfg.rounds, cfg.runs, cfg.seed)?;
    out.csv("round_log.csv", &logs)?;

    let agg = case_aggregate(&logs)?;
    out.csv("aggregate.csv", &agg)?;

    let (best, best_p) = model.best_arm();
    let mut lines = vec![format!(
        "{} policies x {} runs x {} rounds; best arm {best} (p = {best_p:.4})",
        policies.len(),
        cfg.runs,
        cfg.rounds
    )];
    for r in agg.iter().filter(|r| r.round == cfg.rounds) {
        lines.push(format!(
            "{:<12} {:<10} {:>12.3} +- {:.3}",
            r.policy, r.metric, r.mean, r.stderr
        ));
    }
    Ok(lines)
}

fn case_aggregate(logs: &[RoundLog]) -> Result<Vec<CaseAggregateRecord>, HarnessError> {
    let keyed = logs.iter().flat_map(|l| {
        let base = [l.policy.clone(), l.round.to_string()];
        [
            (
                vec![base[0].clone(), base[1].clone(), "cum_reward".to_string()],
                l.cum_reward as f64,
            ),
            (
                vec![base[0].clone(), base[1].clone(), "cum_regret".to_string()],
                l.cum_regret,
            ),
        ]
    });
    aggregate(keyed)?
        .into_iter()
        .map(|row| {
            Ok(CaseAggregateRecord {
                policy: row.keys[0].clone(),
                round: row.keys[1]
                    .parse()
                    .map_err(|_| HarnessError::Artifact("round key".into()))?,
                metric: row.keys[2].clone(),
                n: row.n,
                mean: row.mean,
                stderr: row.stderr,
            })
        })
        .collect()
}

fn run_pipeline(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<String>, HarnessError> {
    let catalog = build_catalog(cfg)?;
    let params = params_for(cfg, &catalog)?;
    let scored = score_catalog(&params, &catalog)?;
    let users = session_users(cfg, &catalog)?;
    let variants = [
        SessionPolicy::Static,
        SessionPolicy::RevisedTs(cfg.session_sampler.clone()),
    ];

    // sessions[v][s]
    let sessions: Vec<Vec<Vec<SessionEntry>>> = variants
        .iter()
        .map(|policy| {
            (0..cfg.sessions)
                .into_par_iter()
                .map(|s| {
                    let mut r = rng(run_seed(cfg.seed, s as u64), STREAM_SESSION);
                    run_session(
                        &scored,
                        policy,
                        &users[s],
                        cfg.page_size,
                        cfg.max_pages,
                        &mut r,
                    )
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    out.text("catalog.tsv", &catalog.serialize())?;
    out.csv("scores.csv", &score_records(&catalog, &scored))?;
    let catalog_ref = &catalog;
    for (v, policy) in variants.iter().enumerate() {
        let rows: Vec<SessionRecord> = sessions[v]
            .iter()
            .enumerate()
            .flat_map(|(s, log)| {
                log.iter().map(move |e| {
                    let catalog = catalog_ref;
                    let item = &catalog.items[e.item];
                    SessionRecord {
                        session: s,
                        page: e.page,
                        position: e.position,
                        item_id: item.id.clone(),
                        category: catalog.categories[e.category].clone(),
                        exposed: u8::from(e.exposed),
                        clicked: u8::from(e.clicked),
                        ordered: u8::from(e.ordered),
                        gmv: item.gmv,
                    }
                })
            })
            .collect();
        out.csv(
            &format!("sessions_{}.csv", policy.name().replace('-', "_")),
            &rows,
        )?;
    }

    // dcg[v][s][k]; a page not reached scores 0
    let dcg: Vec<Vec<Vec<f64>>> = sessions
        .iter()
        .map(|per_session| {
            per_session
                .iter()
                .map(|log| page_scores(&catalog, log, cfg.page_size, cfg.max_pages, cfg.p))
                .collect()
        })
        .collect();

    let mut page_rows = Vec::new();
    for (v, policy) in variants.iter().enumerate() {
        for k in 0..cfg.max_pages {
            let values: Vec<f64> = dcg[v].iter().map(|d| d[k]).collect();
            let (mean, stderr) = mean_stderr(&values);
            page_rows.push(PageDcgRecord {
                variant: policy.name().to_string(),
                page: page_label(k),
                n: values.len(),
                mean,
                stderr,
            });
        }
    }
    out.csv("page_dcg.csv", &page_rows)?;

    let mut comparison = Vec::new();
    let mut lines = vec![format!(
        "{} sessions, {} items, page_size {}, p = {}",
        cfg.sessions,
        catalog.items.len(),
        cfg.page_size,
        cfg.p
    )];
    for k in 0..cfg.max_pages {
        let (mut wins, mut losses, mut ties) = (0u64, 0u64, 0u64);
        let (mut sum_static, mut sum_mab) = (0.0, 0.0);
        for s in 0..cfg.sessions {
            let (a, b) = (dcg[0][s][k], dcg[1][s][k]);
            sum_static += a;
            sum_mab += b;
            match b.partial_cmp(&a) {
                Some(std::cmp::Ordering::Greater) => wins += 1,
                Some(std::cmp::Ordering::Less) => losses += 1,
                _ => ties += 1,
            }
        }
        let n = cfg.sessions as f64;
        let rec = PageComparisonRecord {
            page: page_label(k),
            sessions: cfg.sessions,
            wins,
            losses,
            ties,
            mean_static: sum_static / n,
            mean_dnn_mab: sum_mab / n,
            mean_diff: (sum_mab - sum_static) / n,
            p_value: sign_test_p(wins, losses),
        };
        lines.push(format!(
            "{:<7} static {:>9.3}  dnn-mab {:>9.3}  diff {:>+9.3}  W/L/T {}/{}/{}  p = {:.3e}",
            rec.page,
            rec.mean_static,
            rec.mean_dnn_mab,
            rec.mean_diff,
            wins,
            losses,
            ties,
            rec.p_value
        ));
        comparison.push(rec);
    }
    out.csv("page_comparison.csv", &comparison)?;
    Ok(lines)
}

fn session_users(
    cfg: &ExperimentConfig,
    catalog: &Catalog,
) -> Result<Vec<UserProfile>, HarnessError> {
    let profile = |preferred_arms| UserProfile {
        preferred_arms,
        click_prob_preferred: cfg.user.click_prob_preferred,
        click_prob_other: cfg.user.click_prob_other,
        order_prob_given_click: cfg.user.order_prob_given_click,
    };
    if cfg.user.preferred == [RANDOM_INTENT] {
        let mut r = rng(cfg.seed, STREAM_INTENT);
        let m = catalog.num_categories();
        return Ok((0..cfg.sessions)
            .map(|_| profile(vec![r.random_range(0..m)]))
            .collect());
    }
    let arms: Vec<usize> = cfg
        .user
        .preferred
        .iter()
        .map(|name| {
            catalog.category_index(name).ok_or_else(|| {
                HarnessError::Usage(format!("preferred category `{name}` not in catalog"))
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(vec![profile(arms); cfg.sessions])
}

fn page_scores(
    catalog: &Catalog,
    log: &[SessionEntry],
    page_size: usize,
    max_pages: usize,
    p: usize,
) -> Vec<f64> {
    let list = RankedList::new(
        log.iter()
            .map(|e| RankedEntry {
                gmv: catalog.items[e.item].gmv,
                ordered: e.ordered,
            })
            .collect(),
    );
    let paged = PagedList::paginate(&list, page_size);
    (0..max_pages)
        .map(|k| page_dcg(&paged, k, p).unwrap_or(0.0))
        .collect()
}

/// Summarizes the artifacts in `dir` and checks them against its manifest.
pub fn report(dir: &Path) -> Result<String, HarnessError> {
    let manifest = read_manifest(dir)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "mode {} seed {} config {}",
        manifest.mode,
        manifest.seed,
        &manifest.config_sha256[..manifest.config_sha256.len().min(16)]
    );
    let mut intact = true;
    for (name, hash) in &manifest.artifacts {
        let path = dir.join(name);
        let status = match fs::read(&path) {
            Ok(bytes) if sha256_hex(&bytes) == *hash => "ok",
            Ok(_) => "MODIFIED",
            Err(_) => "MISSING",
        };
        intact &= status == "ok";
        let _ = writeln!(s, "  {name:<24} {status}");
    }
    if !intact {
        return Err(HarnessError::Artifact(format!(
            "artifacts in {} do not match the manifest\n{s}",
            dir.display()
        )));
    }
    let has = |name: &str| manifest.artifacts.iter().any(|(n, _)| n == name);

    if has("loss_curve.csv") {
        let curve: Vec<LossRecord> = read_csv(&dir.join("loss_curve.csv"))?;
        if let (Some(a), Some(b)) = (curve.first(), curve.last()) {
            let _ = writeln!(
                s,
                "loss {:.6} -> {:.6} over {} epochs",
                a.loss, b.loss, b.epoch
            );
        }
    }
    if has("scores.csv") {
        let scores: Vec<ScoreRecord> = read_csv(&dir.join("scores.csv"))?;
        if let Some(top) = scores
            .iter()
            .max_by(|a, b| a.norm_score.total_cmp(&b.norm_score))
        {
            let _ = writeln!(
                s,
                "{} scored items, top {} ({})",
                scores.len(),
                top.item_id,
                top.category
            );
        }
    }
    if has("aggregate.csv") {
        let agg: Vec<CaseAggregateRecord> = read_csv(&dir.join("aggregate.csv"))?;
        let last = agg.iter().map(|r| r.round).max().unwrap_or(0);
        let _ = writeln!(s, "final round {last}:");
        for r in agg.iter().filter(|r| r.round == last) {
            let _ = writeln!(
                s,
                "  {:<12} {:<10} {:>12.3} +- {:.3}",
                r.policy, r.metric, r.mean, r.stderr
            );
        }
    }
    if has("page_comparison.csv") {
        let cmp: Vec<PageComparisonRecord> = read_csv(&dir.join("page_comparison.csv"))?;
        let _ = writeln!(s, "page-wise dcg, dnn-mab vs static:");
        for r in &cmp {
            let _ = writeln!(
                s,
                "  {:<7} {:>9.3} vs {:>9.3}  W/L/T {}/{}/{}  p = {:.3e}",
                r.page, r.mean_dnn_mab, r.mean_static, r.wins, r.losses, r.ties, r.p_value
            );
        }
    }
    Ok(s)
}
