use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use crate::engine::ops::OpCounter;
use crate::engine::{dot_f32, RankedList};
use crate::error::{Error, Result};
use crate::store::{normalize_in_place, FeatureStore};

/// One rated item from the first retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackEntry {
    pub item_id: String,
    pub vector: Vec<f32>,
    pub relevant: bool,
}

/// The user's binary ratings of the first-round results.
///
/// Entry order is significant: it is the tie-break order of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSet {
    dim: usize,
    entries: Vec<FeedbackEntry>,
}

impl FeedbackSet {
    /// Validates and normalizes the entries.
    pub fn new(mut entries: Vec<FeedbackEntry>) -> Result<Self> {
        let dim = entries.first().ok_or(Error::EmptyFeedback)?.vector.len();
        let mut seen = HashSet::with_capacity(entries.len());
        for (row, entry) in entries.iter_mut().enumerate() {
            if !seen.insert(entry.item_id.clone()) {
                return Err(Error::DuplicateId(entry.item_id.clone()));
            }
            if entry.vector.len() != dim {
                return Err(Error::DimMismatch {
                    what: "feedback vector dim",
                    expected: dim as u64,
                    found: entry.vector.len() as u64,
                });
            }
            if entry.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    id: entry.item_id.clone(),
                });
            }
            normalize_in_place(&mut entry.vector).ok_or_else(|| Error::ZeroVector {
                row,
                id: entry.item_id.clone(),
            })?;
        }
        Ok(Self { dim, entries })
    }

    /// Pairs each item of a ranked list with a bit, taking vectors from `store`.
    pub fn from_ranked(ranked: &RankedList, bits: &[bool], store: &FeatureStore) -> Result<Self> {
        if ranked.len() != bits.len() {
            return Err(Error::DimMismatch {
                what: "feedback length",
                expected: ranked.len() as u64,
                found: bits.len() as u64,
            });
        }
        let entries = ranked
            .iter()
            .zip(bits)
            .map(|(e, &relevant)| FeedbackEntry {
                item_id: e.item_id.clone(),
                vector: store.vector(e.row).to_vec(),
                relevant,
            })
            .collect();
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FeedbackEntry] {
        &self.entries
    }

    pub fn positive_count(&self) -> usize {
        self.entries.iter().filter(|e| e.relevant).count()
    }
}

/// 1-NN classifier over a feedback set: an item is predicted relevant iff
/// its most similar rated item was rated relevant.
///
/// Construction does no computation beyond taking ownership of the set.
#[derive(Debug, Clone)]
pub struct PreferenceClassifier {
    feedback: Arc<FeedbackSet>,
}

impl PreferenceClassifier {
    pub fn new(feedback: impl Into<Arc<FeedbackSet>>) -> Result<Self> {
        let feedback = feedback.into();
        if feedback.is_empty() {
            return Err(Error::EmptyFeedback);
        }
        Ok(Self { feedback })
    }

    pub fn feedback(&self) -> &FeedbackSet {
        &self.feedback
    }

    pub fn dim(&self) -> usize {
        self.feedback.dim
    }

    pub fn classify(&self, item: &[f32]) -> Result<bool> {
        self.check_dim(item)?;
        Ok(self.nearest(item).1)
    }

    /// Index of the most similar feedback entry and its bit.
    ///
    /// Ties on the f64 similarity go to the lowest entry index.
    pub fn nearest(&self, item: &[f32]) -> (usize, bool) {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, entry) in self.feedback.entries.iter().enumerate() {
            let sim = dot_f32(item, &entry.vector);
            if sim > best_sim {
                best = i;
                best_sim = sim;
            }
        }
        (best, self.feedback.entries[best].relevant)
    }

    /// Keeps the entries of `candidates` predicted relevant, in rank order.
    pub(crate) fn filter(
        &self,
        candidates: RankedList,
        store: &FeatureStore,
        ops: &mut OpCounter,
    ) -> RankedList {
        let start = Instant::now();
        let n = candidates.len();
        let kept = candidates
            .into_entries()
            .into_iter()
            .filter(|e| self.nearest(store.vector(e.row)).1)
            .collect();
        ops.add_evals(n * self.feedback.len());
        ops.add_filter_time(start);
        RankedList::from_sorted(kept)
    }

    pub(crate) fn check_dim(&self, item: &[f32]) -> Result<()> {
        if item.len() != self.dim() {
            return Err(Error::DimMismatch {
                what: "vector dim",
                expected: self.dim() as u64,
                found: item.len() as u64,
            });
        }
        Ok(())
    }
}
