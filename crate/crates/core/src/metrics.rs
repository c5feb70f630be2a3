//! Position-discounted GMV gain, per-page gain, and run aggregation.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("page {page} out of range ({pages} pages)")]
    PageOutOfRange { page: usize, pages: usize },
    #[error("nothing to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedEntry {
    pub gmv: f64,
    pub ordered: bool,
}

/// Entries in presentation order; position `i` (0-based) is rank `i + 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn new(entries: Vec<RankedEntry>) -> Self {
        RankedList { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<(f64, bool)> for RankedList {
    fn from_iter<I: IntoIterator<Item = (f64, bool)>>(iter: I) -> Self {
        RankedList::new(
            iter.into_iter()
                .map(|(gmv, ordered)| RankedEntry { gmv, ordered })
                .collect(),
        )
    }
}

/// Pages in presentation order; page `k` is 0-based.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PagedList {
    pub pages: Vec<RankedList>,
}

impl PagedList {
    /// Splits a flat list into consecutive pages of `page_size` entries.
    pub fn paginate(list: &RankedList, page_size: usize) -> Self {
        PagedList {
            pages: list
                .entries
                .chunks(page_size.max(1))
                .map(|c| RankedList::new(c.to_vec()))
                .collect(),
        }
    }
}

/// `sum gmv_i * ordered_i / log2(i + 1)` over 1-based positions.
pub fn dcg(list: &RankedList) -> f64 {
    dcg_prefix(&list.entries)
}

fn dcg_prefix(entries: &[RankedEntry]) -> f64 {
    entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.ordered)
        .map(|(i, e)| e.gmv / ((i + 2) as f64).log2())
        .sum()
}

/// dcg of the first `p` entries of page `page`, positions restarting at 1.
pub fn page_dcg(paged: &PagedList, page: usize, p: usize) -> Result<f64, MetricsError> {
    let list = paged.pages.get(page).ok_or(MetricsError::PageOutOfRange {
        page,
        pages: paged.pages.len(),
    })?;
    Ok(dcg_prefix(&list.entries[..p.min(list.len())]))
}

/// Total GMV of ordered entries.
pub fn session_gmv<'a>(entries: impl IntoIterator<Item = &'a RankedEntry>) -> f64 {
    entries
        .into_iter()
        .filter(|e| e.ordered)
        .map(|e| e.gmv)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub keys: Vec<String>,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; 0 when `n == 1`.
    pub stderr: f64,
}

/// Mean and standard error per group, groups in order of first appearance.
pub fn aggregate<K, I>(rows: I) -> Result<Vec<AggregateRow>, MetricsError>
where
    K: AsRef<[String]>,
    I: IntoIterator<Item = (K, f64)>,
{
    let mut index: HashMap<Vec<String>, usize> = HashMap::new();
    let mut groups: Vec<(Vec<String>, Vec<f64>)> = Vec::new();
    for (keys, value) in rows {
        let keys = keys.as_ref();
        let slot = match index.get(keys) {
            Some(&i) => i,
            None => {
                index.insert(keys.to_vec(), groups.len());
                groups.push((keys.to_vec(), Vec::new()));
                groups.len() - 1
            }
        };
        groups[slot].1.push(value);
    }
    if groups.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(groups
        .into_iter()
        .map(|(keys, values)| {
            let (mean, stderr) = mean_stderr(&values);
            AggregateRow {
                keys,
                n: values.len(),
                mean,
                stderr,
            }
        })
        .collect())
}

pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `wins + losses` fair coin flips. Ties are excluded by the caller.
pub fn sign_test_p(wins: u64, losses: u64) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    // sum_{k >= wins} C(n, k) / 2^n, accumulated in log space
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_c = 0.0; // ln C(n, 0)
    let mut tail = 0.0;
    for k in 0..=n {
        if k >= wins {
            tail += (ln_c + ln_half_n).exp();
        }
        ln_c += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
    }
    tail.min(1.0)
}
