//! Experiment configuration: `[section]` headers with `key = value` lines.

use std::path::PathBuf;
use std::str::FromStr;

use super::{HarnessError, SynthSpec};
use crate::bandit::{BaselinePolicy, RevisedTsConfig};
use crate::pretrain::TrainConfig;
use crate::sim::{CasePolicy, DEFAULT_OFFSETS};

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    /// `(key, value, line)`
    pub entries: Vec<(String, String, usize)>,
}

/// Parsed but untyped config file. Keys before the first header belong to
/// a section named `""`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDoc {
    pub sections: Vec<Section>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut sections = vec![Section {
            name: String::new(),
            entries: Vec::new(),
        }];
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| HarnessError::config(line_no, "unterminated section header"))?;
                sections.push(Section {
                    name: name.trim().to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(line_no, "expected `key = value`"))?;
            let value = value.split_once(" #").map_or(value, |(v, _)| v);
            sections
                .last_mut()
                .expect("at least the root section")
                .entries
                .push((key.trim().to_string(), value.trim().to_string(), line_no));
        }
        Ok(ConfigDoc { sections })
    }

    pub fn sections<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }
}

impl Section {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| HarnessError::config(line, format!("{key}: {e}"))),
        }
    }

    fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<(), HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.parse(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|e| HarnessError::config(line, format!("{key}: `{s}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn check_known(&self, known: &[&str]) -> Result<(), HarnessError> {
        match self
            .entries
            .iter()
            .find(|(k, _, _)| !known.contains(&k.as_str()))
        {
            Some((k, _, line)) => Err(HarnessError::config(
                *line,
                format!("unknown key `{k}` in [{}]", self.name),
            )),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    CaseStudy,
    Pipeline,
    Train,
    Score,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::CaseStudy => "case-study",
            Mode::Pipeline => "pipeline",
            Mode::Train => "train",
            Mode::Score => "score",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "case-study" => Ok(Mode::CaseStudy),
            "pipeline" => Ok(Mode::Pipeline),
            "train" => Ok(Mode::Train),
            "score" => Ok(Mode::Score),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogSource {
    File(PathBuf),
    Synth(SynthSpec),
}

/// Preferred categories are named, resolved against the catalog at run time.
/// The single name `random` gives each session one uniformly drawn category.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub preferred: Vec<String>,
    pub click_prob_preferred: f64,
    pub click_prob_other: f64,
    pub order_prob_given_click: f64,
}

impl Default for UserSpec {
    fn default() -> Self {
        UserSpec {
            preferred: vec![super::RANDOM_INTENT.into()],
            click_prob_preferred: 0.9,
            click_prob_other: 0.05,
            order_prob_given_click: 0.5,
        }
    }
}

/// One `[policy]` block.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBlock {
    pub name: String,
    pub revised: RevisedTsConfig,
    pub offsets: Vec<f64>,
    pub epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const POLICY_NAMES: [&str; 6] = [
    "revised-ts",
    "normal-ts",
    "ucb1",
    "eps-greedy",
    "random",
    "oracle",
];

impl PolicyBlock {
    pub fn defaults(name: &str) -> Result<Self, HarnessError> {
        if !POLICY_NAMES.contains(&name) {
            return Err(HarnessError::Usage(format!(
                "unknown policy `{name}` (expected one of {})",
                POLICY_NAMES.join(", ")
            )));
        }
        Ok(PolicyBlock {
            name: name.to_string(),
            revised: RevisedTsConfig::default(),
            offsets: DEFAULT_OFFSETS.to_vec(),
            epsilon: DEFAULT_EPSILON,
        })
    }

    pub fn to_case_policy(&self) -> CasePolicy {
        match self.name.as_str() {
            "revised-ts" => CasePolicy::RevisedTs {
                config: self.revised.clone(),
                offsets: self.offsets.clone(),
            },
            "normal-ts" => CasePolicy::Baseline(BaselinePolicy::NormalTs),
            "ucb1" => CasePolicy::Baseline(BaselinePolicy::Ucb1),
            "eps-greedy" => CasePolicy::Baseline(BaselinePolicy::EpsGreedy {
                epsilon: self.epsilon,
            }),
            "random" => CasePolicy::Baseline(BaselinePolicy::Random),
            "oracle" => CasePolicy::Oracle,
            other => unreachable!("validated policy name {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub rounds: u64,
    pub runs: u64,
    pub page_size: usize,
    pub max_pages: usize,
    /// dcg cutoff within a page.
    pub p: usize,
    pub sessions: usize,
    pub out_dir: PathBuf,
    pub catalog: CatalogSource,
    pub click_arms: Vec<(f64, f64)>,
    pub click_threshold: f64,
    pub policies: Vec<PolicyBlock>,
    pub train: TrainConfig,
    pub pairs: usize,
    /// Pre-trained parameters for `score` and `pipeline`; trained inline when absent.
    pub params_path: Option<PathBuf>,
    pub user: UserSpec,
    /// Post-ranker settings for pipeline sessions.
    pub session_sampler: RevisedTsConfig,
}

/// Feedback gains of the pipeline post-ranker. Arm priors there sum the
/// scores of a whole category, so unit gains barely move them within a session.
pub const SESSION_THETA2: f64 = 20.0;
pub const SESSION_THETA3: f64 = 20.0;

impl ExperimentConfig {
    pub fn defaults(mode: Mode) -> Self {
        let policies = ["revised-ts", "normal-ts", "ucb1", "eps-greedy", "random"]
            .iter()
            .map(|n| PolicyBlock::defaults(n).expect("known name"))
            .collect();
        ExperimentConfig {
            mode,
            seed: 42,
            rounds: 10_000,
            runs: 10,
            page_size: 8,
            max_pages: 8,
            p: 8,
            sessions: 200,
            out_dir: PathBuf::from("out"),
            catalog: CatalogSource::Synth(SynthSpec::default()),
            click_arms: vec![(6.0, 2.0), (4.0, 4.0), (2.0, 6.0), (3.0, 3.0), (5.0, 5.0)],
            click_threshold: 0.5,
            policies,
            train: TrainConfig {
                seed: 42,
                ..TrainConfig::default()
            },
            pairs: 2000,
            params_path: None,
            user: UserSpec::default(),
            session_sampler: RevisedTsConfig {
                theta2: SESSION_THETA2,
                theta3: SESSION_THETA3,
                ..RevisedTsConfig::default()
            },
        }
    }

    /// Applies a config file on top of the defaults for `mode`.
    pub fn from_text(mode: Mode, text: &str) -> Result<Self, HarnessError> {
        let doc = ConfigDoc::parse(text)?;
        let mut cfg = Self::defaults(mode);
        for s in &doc.sections {
            match s.name.as_str() {
                "" | "experiment" | "catalog" | "click_model" | "train" | "user" | "session"
                | "policy" => {}
                other => {
                    let line = s.entries.first().map_or(0, |e| e.2);
                    return Err(HarnessError::config(
                        line,
                        format!("unknown section [{other}]"),
                    ));
                }
            }
        }
        for s in doc.sections("").chain(doc.sections("experiment")) {
            s.check_known(&[
                "mode",
                "seed",
                "rounds",
                "runs",
                "page_size",
                "max_pages",
                "p",
                "sessions",
                "out",
            ])?;
            if let Some(m) = s.parse::<Mode>("mode")? {
                if m != mode {
                    return Err(HarnessError::Usage(format!(
                        "config declares mode `{}` but `{}` was requested",
                        m.name(),
                        mode.name()
                    )));
                }
            }
            s.set("seed", &mut cfg.seed)?;
            s.set("rounds", &mut cfg.rounds)?;
            s.set("runs", &mut cfg.runs)?;
            s.set("page_size", &mut cfg.page_size)?;
            s.set("max_pages", &mut cfg.max_pages)?;
            s.set("p", &mut cfg.p)?;
            s.set("sessions", &mut cfg.sessions)?;
            if let Some(out) = s.parse::<PathBuf>("out")? {
                cfg.out_dir = out;
            }
        }
        for s in doc.sections("catalog") {
            s.check_known(&[
                "path",
                "items",
                "categories",
                "m_feat",
                "gmv_mu",
                "gmv_sigma",
                "noise",
                "positive_fraction",
            ])?;
            if let Some(path) = s.parse::<PathBuf>("path")? {
                cfg.catalog = CatalogSource::File(path);
            } else {
                let mut spec = match &cfg.catalog {
                    CatalogSource::Synth(spec) => spec.clone(),
                    CatalogSource::File(_) => SynthSpec::default(),
                };
                s.set("items", &mut spec.n_items)?;
                s.set("categories", &mut spec.n_categories)?;
                s.set("m_feat", &mut spec.m_feat)?;
                s.set("gmv_mu", &mut spec.gmv_mu)?;
                s.set("gmv_sigma", &mut spec.gmv_sigma)?;
                s.set("noise", &mut spec.noise)?;
                s.set("positive_fraction", &mut spec.positive_fraction)?;
                cfg.catalog = CatalogSource::Synth(spec);
            }
        }
        for s in doc.sections("click_model") {
            s.check_known(&["arms", "threshold"])?;
            if let Some(arms) = s.list::<String>("arms")? {
                let line = s.get("arms").map_or(0, |(_, l)| l);
                cfg.click_arms = arms
                    .iter()
                    .map(|a| {
                        let (x, y) = a.split_once(':').ok_or_else(|| {
                            HarnessError::config(line, format!("arm `{a}` is not `a:b`"))
                        })?;
                        let parse = |t: &str| {
                            t.trim()
                                .parse::<f64>()
                                .map_err(|e| HarnessError::config(line, format!("arm `{a}`: {e}")))
                        };
                        Ok((parse(x)?, parse(y)?))
                    })
                    .collect::<Result<_, HarnessError>>()?;
            }
            s.set("threshold", &mut cfg.click_threshold)?;
        }
        for s in doc.sections("train") {
            s.check_known(&[
                "margin",
                "learning_rate",
                "epochs",
                "batch_size",
                "lambda",
                "hidden",
                "init_scale",
                "pairs",
                "params",
            ])?;
            let t = &mut cfg.train;
            s.set("margin", &mut t.margin)?;
            s.set("learning_rate", &mut t.learning_rate)?;
            s.set("epochs", &mut t.epochs)?;
            s.set("batch_size", &mut t.batch_size)?;
            s.set("lambda", &mut t.lambda)?;
            s.set("init_scale", &mut t.init_scale)?;
            if let Some(h) = s.list("hidden")? {
                t.hidden = h;
            }
            s.set("pairs", &mut cfg.pairs)?;
            cfg.params_path = s.parse("params")?.or(cfg.params_path.take());
        }
        for s in doc.sections("user") {
            s.check_known(&[
                "preferred",
                "click_prob_preferred",
                "click_prob_other",
                "order_prob_given_click",
            ])?;
            if let Some(p) = s.list("preferred")? {
                cfg.user.preferred = p;
            }
            s.set("click_prob_preferred", &mut cfg.user.click_prob_preferred)?;
            s.set("click_prob_other", &mut cfg.user.click_prob_other)?;
            s.set(
                "order_prob_given_click",
                &mut cfg.user.order_prob_given_click,
            )?;
        }
        for s in doc.sections("session") {
            s.check_known(&REVISED_KEYS)?;
            apply_revised(s, &mut cfg.session_sampler)?;
            let line = s.entries.first().map_or(0, |e| e.2);
            cfg.session_sampler
                .validate()
                .map_err(|e| HarnessError::config(line, e.to_string()))?;
        }
        let blocks: Vec<&Section> = doc.sections("policy").collect();
        if !blocks.is_empty() {
            cfg.policies = blocks
                .into_iter()
                .map(parse_policy_block)
                .collect::<Result<_, _>>()?;
        }
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    /// Restricts the policy list to `names`, in the given order. Names with
    /// a matching `[policy]` block keep its parameters.
    pub fn select_policies(&mut self, names: &[String]) -> Result<(), HarnessError> {
        if names.is_empty() {
            return Ok(());
        }
        self.policies = names
            .iter()
            .map(|n| match self.policies.iter().find(|b| &b.name == n) {
                Some(b) => Ok(b.clone()),
                None => PolicyBlock::defaults(n),
            })
            .collect::<Result<_, _>>()?;
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Usage(m));
        if self.rounds == 0 || self.runs == 0 {
            return bad("rounds and runs must be positive".into());
        }
        if !(4..=20).contains(&self.page_size) {
            return bad(format!("page_size {} outside [4, 20]", self.page_size));
        }
        if self.p == 0 || self.sessions == 0 {
            return bad("p and sessions must be positive".into());
        }
        if self.policies.is_empty() {
            return bad("no policies configured".into());
        }
        if self.pairs == 0 {
            return bad("pairs must be positive".into());
        }
        if let CatalogSource::File(p) = &self.catalog {
            if !p.exists() {
                return bad(format!("catalog file {} does not exist", p.display()));
            }
        }
        if let Some(p) = &self.params_path {
            if !p.exists() {
                return bad(format!("params file {} does not exist", p.display()));
            }
        }
        self.train
            .validate()
            .map_err(|e| HarnessError::Usage(e.to_string()))?;
        Ok(())
    }

    /// Stable text used to fingerprint a run. The output directory is excluded.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        format!("{c:#?}")
    }
}

const REVISED_KEYS: [&str; 8] = [
    "theta1",
    "theta2",
    "theta3",
    "scale",
    "prior_alpha",
    "prior_beta",
    "selection_rule",
    "score_update",
];

fn apply_revised(s: &Section, r: &mut RevisedTsConfig) -> Result<(), HarnessError> {
    s.set("theta1", &mut r.theta1)?;
    s.set("theta2", &mut r.theta2)?;
    s.set("theta3", &mut r.theta3)?;
    s.set("scale", &mut r.scale)?;
    s.set("prior_alpha", &mut r.prior_alpha)?;
    s.set("prior_beta", &mut r.prior_beta)?;
    s.set("selection_rule", &mut r.selection_rule)?;
    s.set("score_update", &mut r.score_update)?;
    Ok(())
}

fn parse_policy_block(s: &Section) -> Result<PolicyBlock, HarnessError> {
    let mut known = vec!["policy", "epsilon", "offsets"];
    known.extend(REVISED_KEYS);
    s.check_known(&known)?;
    let (name, line) = s.get("policy").ok_or_else(|| {
        HarnessError::config(
            s.entries.first().map_or(0, |e| e.2),
            "[policy] needs `policy = <name>`",
        )
    })?;
    let mut block =
        PolicyBlock::defaults(name).map_err(|e| HarnessError::config(line, e.to_string()))?;
    apply_revised(s, &mut block.revised)?;
    s.set("epsilon", &mut block.epsilon)?;
    if let Some(o) = s.list("offsets")? {
        block.offsets = o;
    }
    if !(0.0..=1.0).contains(&block.epsilon) {
        return Err(HarnessError::config(line, "epsilon must lie in [0, 1]"));
    }
    block
        .revised
        .validate()
        .map_err(|e| HarnessError::config(line, e.to_string()))?;
    Ok(block)
}
