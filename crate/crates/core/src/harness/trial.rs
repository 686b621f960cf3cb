//! Simulated users: which items count as positive, and the feedback they give.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{FeedbackEntry, FeedbackSet, RankedList};
use crate::error::{Error, Result};
use crate::store::{FeatureStore, LabeledCorpus, LabeledItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Positives share the query's label set.
    Category,
    /// One trial per query label; positives carry that label.
    OneLabel,
    /// One trial per other adjective; positives carry that adjective and the
    /// query's noun.
    Conditioned,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Category => "category",
            TaskKind::OneLabel => "one-label",
            TaskKind::Conditioned => "conditioned",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "category" => Ok(TaskKind::Category),
            "one-label" => Ok(TaskKind::OneLabel),
            "conditioned" => Ok(TaskKind::Conditioned),
            other => Err(Error::InvalidParameter(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    LabelSet(BTreeSet<String>),
    Label(String),
    AdjNoun { adj: String, noun: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTrial {
    pub query_id: String,
    pub kind: TaskKind,
    pub target: Target,
}

impl TaskTrial {
    pub fn is_positive(&self, item: &LabeledItem) -> bool {
        match &self.target {
            Target::LabelSet(labels) => &item.labels == labels,
            Target::Label(label) => item.labels.contains(label),
            Target::AdjNoun { adj, noun } => {
                item.adj.as_deref() == Some(adj.as_str())
                    && item.noun.as_deref() == Some(noun.as_str())
            }
        }
    }
}

/// Corpus-level facts needed to enumerate conditioned trials.
#[derive(Debug, Clone, Default)]
pub struct TrialContext {
    /// Every adjective in the (filtered) corpus.
    pub adjectives: BTreeSet<String>,
    /// (adjective, noun) pairs present in the test database.
    pub test_pairs: HashSet<(String, String)>,
}

impl TrialContext {
    pub fn new<'a>(
        corpus: impl IntoIterator<Item = &'a LabeledItem>,
        test_items: impl IntoIterator<Item = &'a LabeledItem>,
    ) -> Self {
        let adjectives = corpus.into_iter().filter_map(|it| it.adj.clone()).collect();
        let test_pairs = test_items
            .into_iter()
            .filter_map(|it| Some((it.adj.clone()?, it.noun.clone()?)))
            .collect();
        Self {
            adjectives,
            test_pairs,
        }
    }
}

pub fn enumerate_trials(query: &LabeledItem, kind: TaskKind, ctx: &TrialContext) -> Vec<TaskTrial> {
    let trial = |target| TaskTrial {
        query_id: query.id.clone(),
        kind,
        target,
    };
    match kind {
        TaskKind::Category => vec![trial(Target::LabelSet(query.labels.clone()))],
        TaskKind::OneLabel => query
            .labels
            .iter()
            .map(|l| trial(Target::Label(l.clone())))
            .collect(),
        TaskKind::Conditioned => {
            let (Some(own_adj), Some(noun)) = (&query.adj, &query.noun) else {
                return Vec::new();
            };
            ctx.adjectives
                .iter()
                .filter(|adj| *adj != own_adj)
                .filter(|adj| ctx.test_pairs.contains(&((*adj).clone(), noun.clone())))
                .map(|adj| {
                    trial(Target::AdjNoun {
                        adj: adj.clone(),
                        noun: noun.clone(),
                    })
                })
                .collect()
        }
    }
}

/// Rates each item of `ranked` by the trial's positivity predicate, flipping
/// each bit independently with probability `flip_prob`.
pub fn simulate_feedback<R: Rng + ?Sized>(
    ranked: &RankedList,
    store: &FeatureStore,
    corpus: &LabeledCorpus,
    trial: &TaskTrial,
    flip_prob: f64,
    rng: &mut R,
) -> Result<FeedbackSet> {
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(Error::InvalidParameter(format!(
            "flip probability {flip_prob} outside [0, 1]"
        )));
    }
    let entries = ranked
        .iter()
        .map(|e| {
            let item = corpus
                .get(&e.item_id)
                .ok_or_else(|| Error::UnknownItem(e.item_id.clone()))?;
            let mut relevant = trial.is_positive(item);
            if flip_prob > 0.0 && rng.random_bool(flip_prob) {
                relevant = !relevant;
            }
            Ok(FeedbackEntry {
                item_id: e.item_id.clone(),
                vector: store.vector(e.row).to_vec(),
                relevant,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FeedbackSet::new(entries)
}
