//! Seeded stratified 1:2:2 splits into query, feedback and test sets.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::LabeledCorpus;

/// Relative sizes of the query, feedback and test subsets.
pub const SPLIT_RATIO: [usize; 3] = [1, 2, 2];

/// Smallest stratum that can be divided 1:2:2 with every subset non-empty.
pub const MIN_STRATUM: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumAllocation {
    pub labels: Vec<String>,
    /// Items sent to (query, feedback, test).
    pub counts: [usize; 3],
}

/// A partition of a corpus; each id list is in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub query: Vec<String>,
    pub feedback: Vec<String>,
    pub test: Vec<String>,
    pub allocation: Vec<StratumAllocation>,
}

/// Largest-remainder apportionment of `n` items over [`SPLIT_RATIO`].
///
/// Equal remainders favour query, then feedback, then test.
pub fn allocate(n: usize) -> [usize; 3] {
    let total: usize = SPLIT_RATIO.iter().sum();
    let mut counts = [0; 3];
    let mut rems = [0; 3];
    for i in 0..3 {
        counts[i] = n * SPLIT_RATIO[i] / total;
        rems[i] = n * SPLIT_RATIO[i] % total;
    }
    let leftover = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &i in order.iter().take(leftover) {
        counts[i] += 1;
    }
    counts
}

/// Splits `corpus` stratified by full label set.
///
/// Strata are visited in label-set order and each is shuffled by one RNG
/// seeded from `seed`, so the partition depends only on corpus and seed.
pub fn split_corpus(corpus: &LabeledCorpus, seed: u64) -> Result<Split> {
    let mut strata: BTreeMap<&BTreeSet<String>, Vec<usize>> = BTreeMap::new();
    for (i, item) in corpus.items().iter().enumerate() {
        strata.entry(&item.labels).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assigned: [Vec<usize>; 3] = Default::default();
    let mut allocation = Vec::with_capacity(strata.len());
    for (labels, mut members) in strata {
        if members.len() < MIN_STRATUM {
            return Err(Error::StratumTooSmall {
                key: labels.iter().cloned().collect::<Vec<_>>().join(" "),
                size: members.len(),
                min: MIN_STRATUM,
            });
        }
        let counts = allocate(members.len());
        members.shuffle(&mut rng);
        let mut rest = &members[..];
        for (bucket, &n) in assigned.iter_mut().zip(&counts) {
            let (head, tail) = rest.split_at(n);
            bucket.extend_from_slice(head);
            rest = tail;
        }
        allocation.push(StratumAllocation {
            labels: labels.iter().cloned().collect(),
            counts,
        });
    }

    let [query, feedback, test] = assigned.map(|mut idx| {
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| corpus.items()[i].id.clone())
            .collect::<Vec<_>>()
    });
    Ok(Split {
        seed,
        query,
        feedback,
        test,
        allocation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::LabeledItem;
    use std::collections::HashSet;

    fn corpus(sizes: &[usize]) -> LabeledCorpus {
        let mut items = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                items.push(LabeledItem::new(format!("i{}", items.len()), [format!("c{c}")]));
            }
        }
        LabeledCorpus::new(items).unwrap()
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate(5), [1, 2, 2]);
        // quotas (1.4, 2.8, 2.8)
        assert_eq!(allocate(7), [1, 3, 3]);
        // quotas (1.2, 2.4, 2.4): one leftover, tie on .4 goes to feedback
        assert_eq!(allocate(6), [1, 3, 2]);
        // quotas (1.6, 3.2, 3.2)
        assert_eq!(allocate(8), [2, 3, 3]);
        assert_eq!(allocate(100), [20, 40, 40]);
    }

    #[test]
    fn five_item_stratum() {
        let split = split_corpus(&corpus(&[5]), 0).unwrap();
        assert_eq!(
            (split.query.len(), split.feedback.len(), split.test.len()),
            (1, 2, 2)
        );
    }

    #[test]
    fn partition_is_disjoint_and_covering() {
        let c = corpus(&[5, 7, 12, 30]);
        for seed in 0..10 {
            let split = split_corpus(&c, seed).unwrap();
            let all: Vec<&String> = split
                .query
                .iter()
                .chain(&split.feedback)
                .chain(&split.test)
                .collect();
            let set: HashSet<_> = all.iter().collect();
            assert_eq!(all.len(), c.len());
            assert_eq!(set.len(), c.len());
        }
    }

    #[test]
    fn same_seed_same_partition() {
        let c = corpus(&[9, 11]);
        assert_eq!(split_corpus(&c, 3).unwrap(), split_corpus(&c, 3).unwrap());
        assert_ne!(split_corpus(&c, 3).unwrap(), split_corpus(&c, 4).unwrap());
    }

    #[test]
    fn small_stratum_is_rejected() {
        assert!(matches!(
            split_corpus(&corpus(&[5, 4]), 0),
            Err(Error::StratumTooSmall { size: 4, .. })
        ));
    }
}
