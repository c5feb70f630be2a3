//! Items, catalogs and the score normalization that feeds the post-ranker.
//!
//! Catalog text format (UTF-8, line oriented):
//!
//! ```text
//! # comment
//! categories: c1,c2,c3
//! m_feat: 8
//! id<TAB>category<TAB>gmv<TAB>ordered<TAB>i:v,i:v,...
//! ```
//!
//! `m_feat` is optional; when absent the dimensionality is one past the
//! largest feature index seen.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

/// Lower/upper margin of normalized scores; keeps beta parameters positive.
pub const SCORE_EPSILON: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown category `{category}`")]
    UnknownCategory { line: usize, category: String },
    #[error("line {line}: negative gmv {gmv}")]
    NegativeGmv { line: usize, gmv: f64 },
    #[error("line {line}: duplicate item id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("missing `categories:` header")]
    MissingHeader,
    #[error("cannot normalize an empty score list")]
    EmptyScores,
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("invalid catalog: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One rankable product.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    /// Sparse `(index, value)` pairs with strictly increasing indices.
    pub features: Vec<(usize, f64)>,
    /// Index into [`Catalog::categories`]; this is the bandit arm.
    pub category: usize,
    pub gmv: f64,
    /// Ground-truth purchase label.
    pub ordered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub items: Vec<Item>,
    pub m_feat: usize,
    pub categories: Vec<String>,
}

/// A catalog item with its pre-ranker output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredItem {
    /// Position of the item in its catalog.
    pub index: usize,
    pub category: usize,
    pub raw_score: f64,
    /// Always strictly inside (0, 1).
    pub norm_score: f64,
}

impl Catalog {
    /// Builds a catalog, checking every invariant.
    pub fn new(
        categories: Vec<String>,
        m_feat: usize,
        items: Vec<Item>,
    ) -> Result<Self, CatalogError> {
        let catalog = Catalog {
            items,
            m_feat,
            categories,
        };
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let invalid = |m: String| Err(CatalogError::Invalid(m));
        let mut seen_cat = HashSet::new();
        for c in &self.categories {
            if c.is_empty() || c.contains([',', '\t', '\n']) {
                return invalid(format!("bad category name `{c}`"));
            }
            if !seen_cat.insert(c.as_str()) {
                return invalid(format!("duplicate category `{c}`"));
            }
        }
        let mut ids = HashSet::new();
        for item in &self.items {
            if !ids.insert(item.id.as_str()) {
                return invalid(format!("duplicate item id `{}`", item.id));
            }
            if item.category >= self.categories.len() {
                return invalid(format!("item `{}` has unknown category", item.id));
            }
            if !(item.gmv >= 0.0) || !item.gmv.is_finite() {
                return invalid(format!("item `{}` has bad gmv {}", item.id, item.gmv));
            }
            check_features(&item.features, Some(self.m_feat)).map_err(CatalogError::Invalid)?;
        }
        Ok(())
    }

    /// Items grouped by category, as catalog indices.
    pub fn items_by_category(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.categories.len()];
        for (i, item) in self.items.iter().enumerate() {
            groups[item.category].push(i);
        }
        groups
    }

    /// Canonical text form; `load_catalog(serialize())` reproduces `self`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "categories: {}", self.categories.join(","));
        let _ = writeln!(out, "m_feat: {}", self.m_feat);
        for item in &self.items {
            let feats = item
                .features
                .iter()
                .map(|(i, v)| format!("{i}:{v}"))
                .collect::<Vec<_>>()
                .join(",");
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                item.id,
                self.categories[item.category],
                item.gmv,
                u8::from(item.ordered),
                feats
            );
        }
        out
    }
}

fn check_features(features: &[(usize, f64)], m_feat: Option<usize>) -> Result<(), String> {
    for w in features.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(format!(
                "feature indices must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            ));
        }
    }
    for &(i, v) in features {
        if !v.is_finite() {
            return Err(format!("feature {i} has non-finite value"));
        }
        if let Some(m) = m_feat {
            if i >= m {
                return Err(format!("feature index {i} out of range for m_feat {m}"));
            }
        }
    }
    Ok(())
}

fn parse_features(field: &str) -> Result<Vec<(usize, f64)>, String> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(',')
        .map(|pair| {
            let (i, v) = pair
                .split_once(':')
                .ok_or_else(|| format!("feature `{pair}` is not `index:value`"))?;
            let i = i
                .trim()
                .parse::<usize>()
                .map_err(|e| format!("feature index `{i}`: {e}"))?;
            let v = v
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("feature value `{v}`: {e}"))?;
            Ok((i, v))
        })
        .collect()
}

/// Reads a catalog from the line-oriented text format.
pub fn load_catalog<R: BufRead>(source: R) -> Result<Catalog, CatalogError> {
    let mut categories: Option<Vec<String>> = None;
    let mut cat_index: HashMap<String, usize> = HashMap::new();
    let mut declared_m_feat: Option<usize> = None;
    let mut items = Vec::new();
    let mut ids = HashSet::new();

    for (n, line) in source.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let parse_err = |message: String| CatalogError::Parse {
            line: line_no,
            message,
        };

        if let Some(rest) = line.strip_prefix("categories:") {
            if categories.is_some() {
                return Err(parse_err("repeated `categories:` header".into()));
            }
            let names: Vec<String> = rest
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if names.is_empty() {
                return Err(parse_err("no categories declared".into()));
            }
            for (i, name) in names.iter().enumerate() {
                if cat_index.insert(name.clone(), i).is_some() {
                    return Err(parse_err(format!("duplicate category `{name}`")));
                }
            }
            categories = Some(names);
            continue;
        }
        if let Some(rest) = line.strip_prefix("m_feat:") {
            let m = rest
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(format!("m_feat: {e}")))?;
            declared_m_feat = Some(m);
            continue;
        }
        if categories.is_none() {
            return Err(CatalogError::MissingHeader);
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(format!(
                "expected 5 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(parse_err("empty item id".into()));
        }
        let category =
            *cat_index
                .get(fields[1].trim())
                .ok_or_else(|| CatalogError::UnknownCategory {
                    line: line_no,
                    category: fields[1].trim().to_string(),
                })?;
        let gmv = fields[2]
            .trim()
            .parse::<f64>()
            .map_err(|e| parse_err(format!("gmv `{}`: {e}", fields[2])))?;
        if gmv < 0.0 {
            return Err(CatalogError::NegativeGmv { line: line_no, gmv });
        }
        if !gmv.is_finite() {
            return Err(parse_err(format!("gmv `{}` is not finite", fields[2])));
        }
        let ordered = match fields[3].trim() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(format!("ordered must be 0 or 1, got `{other}`"))),
        };
        let features = parse_features(fields[4]).map_err(&parse_err)?;
        check_features(&features, declared_m_feat).map_err(&parse_err)?;
        if !ids.insert(id.to_string()) {
            return Err(CatalogError::DuplicateId {
                line: line_no,
                id: id.to_string(),
            });
        }
        items.push(Item {
            id: id.to_string(),
            features,
            category,
            gmv,
            ordered,
        });
    }

    let categories = categories.ok_or(CatalogError::MissingHeader)?;
    let m_feat = declared_m_feat.unwrap_or_else(|| {
        items
            .iter()
            .filter_map(|it| it.features.last().map(|(i, _)| i + 1))
            .max()
            .unwrap_or(0)
    });
    Catalog::new(categories, m_feat, items)
}

/// Min-max scaling onto `[SCORE_EPSILON, 1 - SCORE_EPSILON]`.
///
/// Order preserving. A constant input maps to 0.5 everywhere.
pub fn normalize_scores(raw: &[f64]) -> Result<Vec<f64>, CatalogError> {
    if raw.is_empty() {
        return Err(CatalogError::EmptyScores);
    }
    if let Some(&bad) = raw.iter().find(|x| !x.is_finite()) {
        return Err(CatalogError::NonFiniteScore(bad));
    }
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if hi == lo {
        return Ok(vec![0.5; raw.len()]);
    }
    let span = hi - lo;
    let width = 1.0 - 2.0 * SCORE_EPSILON;
    Ok(raw
        .iter()
        .map(|&x| SCORE_EPSILON + (x - lo) / span * width)
        .collect())
}
