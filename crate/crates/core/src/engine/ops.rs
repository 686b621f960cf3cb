use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Similarity evaluations and wall time spent in one or more retrievals.
///
/// Counters from independent retrievals combine with [`OpCounter::merge`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OpCounter {
    pub similarity_evals: u64,
    /// Seconds spent scoring and ranking a store.
    pub knn_seconds: f64,
    /// Seconds spent running the preference classifier over candidates.
    pub filter_seconds: f64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn merge(&mut self, other: &OpCounter) {
        self.similarity_evals += other.similarity_evals;
        self.knn_seconds += other.knn_seconds;
        self.filter_seconds += other.filter_seconds;
    }

    pub(crate) fn add_evals(&mut self, n: usize) {
        self.similarity_evals += n as u64;
    }

    pub(crate) fn add_knn_time(&mut self, since: Instant) {
        self.knn_seconds += secs(since.elapsed());
    }

    pub(crate) fn add_filter_time(&mut self, since: Instant) {
        self.filter_seconds += secs(since.elapsed());
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Similarity evaluations of one refined retrieval: `khat` candidates each
/// compared with `feedback_size` rated items, plus one pass over the store.
pub fn refined_eval_count(khat: usize, feedback_size: usize, store_len: usize) -> u64 {
    khat as u64 * feedback_size as u64 + store_len as u64
}

/// Similarity evaluations of one plain K-NN retrieval over the store.
pub fn control_eval_count(store_len: usize) -> u64 {
    store_len as u64
}

/// How many times more similarity evaluations refined retrieval costs than
/// plain K-NN: `1 + khat * feedback_size / store_len`.
pub fn slowdown_ratio(khat: usize, feedback_size: usize, store_len: usize) -> f64 {
    refined_eval_count(khat, feedback_size, store_len) as f64 / control_eval_count(store_len) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_pool_at_m50_is_51_times_the_control() {
        assert_eq!(refined_eval_count(2000, 50, 2000), 102_000);
        assert_eq!(control_eval_count(2000), 2000);
        assert_eq!(slowdown_ratio(2000, 50, 2000), 51.0);
    }

    #[test]
    fn smallest_refined_retrieval() {
        assert_eq!(refined_eval_count(1, 1, 10), 11);
    }

    #[test]
    fn merge_sums() {
        let mut a = OpCounter {
            similarity_evals: 3,
            knn_seconds: 0.5,
            filter_seconds: 0.25,
        };
        a.merge(&a.clone());
        assert_eq!(a.similarity_evals, 6);
        assert_eq!(a.knn_seconds, 1.0);
        assert_eq!(a.filter_seconds, 0.5);
    }
}
