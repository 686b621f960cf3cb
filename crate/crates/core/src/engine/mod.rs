//! Exact cosine K-NN retrieval and feedback-refined retrieval.
//!
//! All rankings sort by descending cosine similarity, accumulated in f64,
//! with exact ties broken by ascending store row. Vectors in a
//! [`FeatureStore`] and a [`QueryVector`] are unit length, so cosine
//! similarity is a plain dot product.

mod feedback;
mod ops;

use std::cmp::Ordering;
use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{FeatureStore, ZERO_NORM};

pub use feedback::{FeedbackEntry, FeedbackSet, PreferenceClassifier};
pub use ops::{control_eval_count, refined_eval_count, slowdown_ratio, OpCounter};

/// A unit-length query feature.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVector {
    values: Vec<f64>,
}

impl QueryVector {
    /// Normalizes `raw` to unit length; any positive rescaling of `raw`
    /// yields the same rankings.
    pub fn new(raw: &[f32]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidParameter("query vector is empty".into()));
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: 0,
                id: "<query>".into(),
            });
        }
        let norm = raw
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt();
        if norm < ZERO_NORM {
            return Err(Error::ZeroVector {
                row: 0,
                id: "<query>".into(),
            });
        }
        Ok(Self {
            values: raw.iter().map(|&x| f64::from(x) / norm).collect(),
        })
    }

    /// Uses row `row` of `store` as the query.
    pub fn from_store(store: &FeatureStore, row: usize) -> Self {
        Self {
            values: store.vector(row).iter().map(|&x| f64::from(x)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn similarity(&self, item: &[f32]) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(item)
            .map(|(&a, &b)| a * f64::from(b))
            .sum();
        // folds -0.0 into +0.0 so that equal scores compare equal
        s + 0.0
    }
}

pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    s + 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub item_id: String,
    pub row: usize,
    pub score: f64,
}

/// Items ordered by non-increasing score, ties by ascending row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    entries: Vec<RankedEntry>,
}

impl RankedList {
    pub(crate) fn from_sorted(entries: Vec<RankedEntry>) -> Self {
        debug_assert!(entries
            .windows(2)
            .all(|w| rank_order(w[0].score, w[0].row, w[1].score, w[1].row) == Ordering::Less));
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RankedEntry> {
        self.entries.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.item_id.as_str())
    }

    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.row)
    }

    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }

    pub fn into_entries(self) -> Vec<RankedEntry> {
        self.entries
    }
}

impl<'a> IntoIterator for &'a RankedList {
    type Item = &'a RankedEntry;
    type IntoIter = std::slice::Iter<'a, RankedEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// Result of a refined retrieval.
#[derive(Debug, Clone, PartialEq)]
pub enum RefinedOutcome {
    Ranked(RankedList),
    /// The classifier rejected every candidate; scored as a failed trial.
    NoCandidates,
}

impl RefinedOutcome {
    pub fn ranked(&self) -> Option<&RankedList> {
        match self {
            RefinedOutcome::Ranked(list) => Some(list),
            RefinedOutcome::NoCandidates => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, RefinedOutcome::NoCandidates)
    }
}

fn rank_order(score_a: f64, row_a: usize, score_b: f64, row_b: usize) -> Ordering {
    score_b.total_cmp(&score_a).then(row_a.cmp(&row_b))
}

fn check_query(query: &QueryVector, store: &FeatureStore) -> Result<()> {
    if query.dim() != store.dim() {
        return Err(Error::DimMismatch {
            what: "query dim",
            expected: store.dim() as u64,
            found: query.dim() as u64,
        });
    }
    Ok(())
}

/// Top-`m` rows of `store` by cosine similarity to `query`.
///
/// Rows whose id is in `exclude` are neither scored nor returned. Returns
/// fewer than `m` entries when the store has fewer eligible rows.
pub fn knn_retrieve(
    query: &QueryVector,
    m: usize,
    store: &FeatureStore,
    exclude: Option<&HashSet<String>>,
    ops: &mut OpCounter,
) -> Result<RankedList> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if m == 0 {
        return Err(Error::InvalidParameter("retrieval size must be at least 1".into()));
    }
    check_query(query, store)?;
    let start = Instant::now();

    let excluded_row = |row: usize| exclude.is_some_and(|ex| ex.contains(store.id(row)));
    let mut scored: Vec<(f64, usize)> = store
        .rows()
        .filter(|(row, _, _)| !excluded_row(*row))
        .map(|(row, _, v)| (query.similarity(v), row))
        .collect();
    ops.add_evals(scored.len());

    let cmp = |a: &(f64, usize), b: &(f64, usize)| rank_order(a.0, a.1, b.0, b.1);
    if m < scored.len() {
        scored.select_nth_unstable_by(m - 1, cmp);
        scored.truncate(m);
    }
    scored.sort_unstable_by(cmp);

    let entries = scored
        .into_iter()
        .map(|(score, row)| RankedEntry {
            item_id: store.id(row).to_owned(),
            row,
            score,
        })
        .collect();
    ops.add_knn_time(start);
    Ok(RankedList::from_sorted(entries))
}

/// Plain K-NN over the test store; the no-feedback arm of an evaluation.
pub fn control_retrieve(
    query: &QueryVector,
    k: usize,
    store: &FeatureStore,
    ops: &mut OpCounter,
) -> Result<RankedList> {
    knn_retrieve(query, k, store, None, ops)
}

/// Feedback-refined retrieval.
///
/// Takes the `khat` nearest candidates, keeps those the classifier predicts
/// relevant (preserving rank order), and returns the first `k` of them.
/// Fewer than `k` survivors is not an error; zero survivors is
/// [`RefinedOutcome::NoCandidates`].
pub fn refined_retrieve(
    query: &QueryVector,
    k: usize,
    khat: usize,
    store: &FeatureStore,
    classifier: &PreferenceClassifier,
    exclude: Option<&HashSet<String>>,
    ops: &mut OpCounter,
) -> Result<RefinedOutcome> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if k == 0 || k > khat || khat > store.len() {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= khat <= store size, got k={k}, khat={khat}, store size={}",
            store.len()
        )));
    }
    if classifier.dim() != store.dim() {
        return Err(Error::DimMismatch {
            what: "classifier dim",
            expected: store.dim() as u64,
            found: classifier.dim() as u64,
        });
    }
    let candidates = knn_retrieve(query, khat, store, exclude, ops)?;
    let mut kept = classifier.filter(candidates, store, ops);
    if kept.is_empty() {
        return Ok(RefinedOutcome::NoCandidates);
    }
    kept.truncate(k);
    Ok(RefinedOutcome::Ranked(kept))
}
