//! Page-by-page browsing sessions over a scored catalog.

use rand::Rng;

use super::SimError;
use crate::bandit::{RevisedThompson, RevisedTsConfig};
use crate::catalog::ScoredItem;

pub const MIN_PAGE_SIZE: usize = 4;
pub const MAX_PAGE_SIZE: usize = 20;

/// Ground-truth intent of a simulated user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub preferred_arms: Vec<usize>,
    pub click_prob_preferred: f64,
    pub click_prob_other: f64,
    pub order_prob_given_click: f64,
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [
            ("click_prob_preferred", self.click_prob_preferred),
            ("click_prob_other", self.click_prob_other),
            ("order_prob_given_click", self.order_prob_given_click),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn click_prob(&self, category: usize) -> f64 {
        if self.preferred_arms.contains(&category) {
            self.click_prob_preferred
        } else {
            self.click_prob_other
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionPolicy {
    /// Pre-ranker order, highest normalized score first.
    Static,
    /// Revised Thompson post-ranker with page-batch feedback.
    RevisedTs(RevisedTsConfig),
}

impl SessionPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SessionPolicy::Static => "static",
            SessionPolicy::RevisedTs(_) => "dnn-mab",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionEntry {
    /// 0-based page index.
    pub page: usize,
    /// 1-based position within the page.
    pub position: usize,
    /// Catalog index of the item.
    pub item: usize,
    pub category: usize,
    pub exposed: bool,
    pub clicked: bool,
    pub ordered: bool,
}

/// Per-item user reactions fixed up front: an item gets the same response
/// wherever it is shown, so two policies run on one seed see one user.
struct Reactions {
    click: Vec<bool>,
    order: Vec<bool>,
}

impl Reactions {
    fn draw<R: Rng + ?Sized>(scored: &[ScoredItem], user: &UserProfile, rng: &mut R) -> Self {
        let n = scored.iter().map(|s| s.index + 1).max().unwrap_or(0);
        let mut click = vec![false; n];
        let mut order = vec![false; n];
        for s in scored {
            let u_click: f64 = rng.random();
            let u_order: f64 = rng.random();
            click[s.index] = u_click < user.click_prob(s.category);
            order[s.index] = click[s.index] && u_order < user.order_prob_given_click;
        }
        Reactions { click, order }
    }
}

pub fn run_session<R: Rng + ?Sized>(
    scored: &[ScoredItem],
    policy: &SessionPolicy,
    user: &UserProfile,
    page_size: usize,
    max_pages: usize,
    rng: &mut R,
) -> Result<Vec<SessionEntry>, SimError> {
    if !(MIN_PAGE_SIZE..=MAX_PAGE_SIZE).contains(&page_size) {
        return Err(SimError::PageSize(page_size));
    }
    if scored.is_empty() {
        return Err(SimError::Invalid(
            "session needs at least one scored item".into(),
        ));
    }
    user.validate()?;
    let reactions = Reactions::draw(scored, user, rng);
    let category_of = |index: usize| {
        scored
            .iter()
            .find(|s| s.index == index)
            .map(|s| s.category)
            .expect("picked items come from the scored list")
    };

    let mut log = Vec::new();
    match policy {
        SessionPolicy::Static => {
            let mut order: Vec<&ScoredItem> = scored.iter().collect();
            // stable: ties keep input order
            order.sort_by(|a, b| b.norm_score.total_cmp(&a.norm_score));
            for (page, chunk) in order.chunks(page_size).take(max_pages).enumerate() {
                for (pos, s) in chunk.iter().enumerate() {
                    log.push(entry(page, pos, s.index, s.category, &reactions));
                }
            }
        }
        SessionPolicy::RevisedTs(config) => {
            let mut sampler = RevisedThompson::init(scored, config.clone())?;
            for page in 0..max_pages {
                let mut shown = Vec::with_capacity(page_size);
                while shown.len() < page_size {
                    match sampler.select_next(rng) {
                        Some(pick) => shown.push(pick.key),
                        None => break,
                    }
                }
                if shown.is_empty() {
                    break;
                }
                for (pos, &key) in shown.iter().enumerate() {
                    let e = entry(page, pos, key, category_of(key), &reactions);
                    sampler.feedback(key, e.clicked)?;
                    log.push(e);
                }
                if shown.len() < page_size {
                    break;
                }
            }
        }
    }
    Ok(log)
}

fn entry(page: usize, pos: usize, item: usize, category: usize, r: &Reactions) -> SessionEntry {
    SessionEntry {
        page,
        position: pos + 1,
        item,
        category,
        exposed: true,
        clicked: r.click[item],
        ordered: r.order[item],
    }
}
