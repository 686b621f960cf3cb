//! Test-and-control evaluation over seeded splits.
//!
//! For each seed the corpus is split 1:2:2 into queries, a feedback database
//! and a disjoint test database. Each trial retrieves `m` items from the
//! feedback database, rates them with the trial's predicate, and scores both
//! the refined retrieval and plain K-NN over the test database.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::{
    control_retrieve, knn_retrieve, refined_retrieve, OpCounter, PreferenceClassifier,
    QueryVector, RankedList, RefinedOutcome,
};
use crate::error::{Error, Result};
use crate::harness::filter::{filter_dataset, DEFAULT_MIN_CAPTION_COUNT};
use crate::harness::split::{split_corpus, Split};
use crate::harness::trial::{enumerate_trials, simulate_feedback, TaskKind, TaskTrial, TrialContext};
use crate::metrics::{aggregate, feedback_correlation, FeedbackPoint, MeanStd, TrialOutcome};
use crate::store::{Dataset, FeatureStore, LabeledCorpus};

/// Candidate-pool size of the refined retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Khat {
    /// The whole test database.
    #[default]
    All,
    Fixed(usize),
}

impl Khat {
    /// Pool size for a test database of `store_len` items.
    pub fn resolve(self, store_len: usize) -> usize {
        match self {
            Khat::All => store_len,
            Khat::Fixed(n) => n.min(store_len),
        }
    }
}

impl fmt::Display for Khat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Khat::All => f.write_str("all"),
            Khat::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Khat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Khat::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Khat::Fixed(n)),
            _ => Err(Error::InvalidParameter(format!(
                "khat must be \"all\" or a positive integer, got {s:?}"
            ))),
        }
    }
}

impl Serialize for Khat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Khat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub task: TaskKind,
    /// Feedback size: items retrieved from the feedback database and rated.
    pub m: usize,
    pub k: Vec<usize>,
    pub khat: Khat,
    pub seeds: Vec<u64>,
    pub flip_prob: f64,
    pub min_caption_count: usize,
}

impl EvalConfig {
    pub fn new(task: TaskKind) -> Self {
        Self {
            task,
            m: 50,
            k: vec![1, 2, 4, 8],
            khat: Khat::All,
            seeds: (0..10).collect(),
            flip_prob: 0.0,
            min_caption_count: DEFAULT_MIN_CAPTION_COUNT,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(Error::InvalidParameter("k values must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("at least one seed is required".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::InvalidParameter("flip probability outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Retrieval ids of one evaluated trial, plus its scored outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: TaskTrial,
    pub first_ids: Vec<String>,
    pub refined_ids: Option<Vec<String>>,
    pub control_ids: Vec<String>,
    pub outcome: TrialOutcome,
    pub refined_ops: OpCounter,
    pub control_ops: OpCounter,
}

/// Feedback and test databases of one split.
#[derive(Debug, Clone)]
pub struct SplitStores {
    pub split: Split,
    pub feedback: FeatureStore,
    pub test: FeatureStore,
    pub context: TrialContext,
}

impl SplitStores {
    pub fn new(dataset: &Dataset, split: Split) -> Result<Self> {
        let rows = |ids: &[String]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|id| {
                    dataset
                        .store()
                        .row_of(id)
                        .ok_or_else(|| Error::UnknownItem(id.clone()))
                })
                .collect()
        };
        let feedback = dataset.store().subset(&rows(&split.feedback)?);
        let test = dataset.store().subset(&rows(&split.test)?);
        let corpus = dataset.corpus();
        let context = TrialContext::new(
            corpus.items(),
            split.test.iter().filter_map(|id| corpus.get(id)),
        );
        Ok(Self {
            split,
            feedback,
            test,
            context,
        })
    }
}

fn seed_for_trial(seed: u64, query: usize, trial: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((query as u64) << 20)
        .wrapping_add(trial as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn positivity(list: &RankedList, corpus: &LabeledCorpus, trial: &TaskTrial) -> Vec<bool> {
    list.iter()
        .map(|e| corpus.get(&e.item_id).is_some_and(|it| trial.is_positive(it)))
        .collect()
}

/// Runs every trial of one query: a single first retrieval shared by all of
/// its trials, then per trial simulated feedback, refined and control
/// retrievals over the test database.
pub fn evaluate_query(
    dataset: &Dataset,
    stores: &SplitStores,
    query_id: &str,
    query_ordinal: usize,
    config: &EvalConfig,
    first_ops: &mut OpCounter,
) -> Result<Vec<TrialRecord>> {
    let corpus = dataset.corpus();
    let (row, item) = dataset
        .get(query_id)
        .ok_or_else(|| Error::UnknownItem(query_id.to_owned()))?;
    let trials = enumerate_trials(item, config.task, &stores.context);
    if trials.is_empty() {
        return Ok(Vec::new());
    }
    let query = QueryVector::from_store(dataset.store(), row);
    let first = knn_retrieve(&query, config.m, &stores.feedback, None, first_ops)?;
    let first_ids: Vec<String> = first.ids().map(str::to_owned).collect();

    let test = &stores.test;
    let khat = config.khat.resolve(test.len());
    let k_max = config.k.iter().copied().max().unwrap_or(1);

    let mut records = Vec::with_capacity(trials.len());
    for (t, trial) in trials.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for_trial(stores.split.seed, query_ordinal, t));
        let feedback =
            simulate_feedback(&first, &stores.feedback, corpus, &trial, config.flip_prob, &mut rng)?;
        let n_positive_feedback = feedback.positive_count();
        let classifier = PreferenceClassifier::new(feedback)?;

        let total_positives = test
            .ids()
            .iter()
            .filter(|id| corpus.get(id).is_some_and(|it| trial.is_positive(it)))
            .count();
        // long enough for both Recall@K and MAP@R
        let depth = k_max.max(total_positives);

        let mut refined_ops = OpCounter::new();
        let refined = refined_retrieve(
            &query,
            depth.min(khat),
            khat,
            test,
            &classifier,
            None,
            &mut refined_ops,
        )?;
        let mut control_ops = OpCounter::new();
        let control = control_retrieve(&query, depth.min(test.len()), test, &mut control_ops)?;

        let (refined_ids, refined_pos) = match &refined {
            RefinedOutcome::Ranked(list) => (
                Some(list.ids().map(str::to_owned).collect()),
                Some(positivity(list, corpus, &trial)),
            ),
            RefinedOutcome::NoCandidates => (None, None),
        };
        records.push(TrialRecord {
            outcome: TrialOutcome {
                refined: refined_pos,
                control: positivity(&control, corpus, &trial),
                n_positive_feedback,
                total_positives,
            },
            control_ids: control.ids().map(str::to_owned).collect(),
            first_ids: first_ids.clone(),
            refined_ids,
            trial,
            refined_ops,
            control_ops,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    /// Recall@K in percent, keyed by K.
    pub per_k: BTreeMap<usize, MeanStd>,
    pub map_at_r: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub queries: usize,
    pub trials: usize,
    pub failures: usize,
    pub refined_recall: BTreeMap<usize, f64>,
    pub control_recall: BTreeMap<usize, f64>,
    pub refined_map_at_r: f64,
    pub control_map_at_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpCounts {
    pub first_retrieval: OpCounter,
    pub refined: OpCounter,
    pub control: OpCounter,
    pub refined_retrievals: u64,
    pub control_retrievals: u64,
    /// Refined over control similarity evaluations.
    pub eval_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub m: usize,
    pub k: Vec<usize>,
    pub khat: Khat,
    pub seeds: Vec<u64>,
    pub flip_prob: f64,
    /// Standard deviations are population (divide by n) over seeds.
    pub std: String,
    pub refined: ArmReport,
    pub control: ArmReport,
    pub trials: usize,
    pub failures: usize,
    pub per_seed: Vec<SeedResult>,
    pub op_counts: OpCounts,
    /// Pearson r of positive-feedback count vs refined MAP@R; absent when
    /// either variable has zero variance.
    pub feedback_correlation: Option<f64>,
    #[serde(skip)]
    pub scatter: Vec<FeedbackPoint>,
}

fn mean_of(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    values.sum::<f64>() / n as f64
}

fn seed_result(seed: u64, queries: usize, records: &[TrialRecord], ks: &[usize]) -> SeedResult {
    let n = records.len();
    let pct = |hits: u64| if n == 0 { f64::NAN } else { 100.0 * hits as f64 / n as f64 };
    let mut refined_recall = BTreeMap::new();
    let mut control_recall = BTreeMap::new();
    for &k in ks {
        let r: u64 = records.iter().map(|t| u64::from(t.outcome.refined_recall(k))).sum();
        let c: u64 = records.iter().map(|t| u64::from(t.outcome.control_recall(k))).sum();
        refined_recall.insert(k, pct(r));
        control_recall.insert(k, pct(c));
    }
    let defined: Vec<&TrialOutcome> = records
        .iter()
        .map(|t| &t.outcome)
        .filter(|o| o.total_positives > 0)
        .collect();
    SeedResult {
        seed,
        queries,
        trials: n,
        failures: records.iter().filter(|t| t.outcome.failed()).count(),
        refined_recall,
        control_recall,
        refined_map_at_r: mean_of(defined.iter().map(|o| o.refined_map_at_r().unwrap_or(0.0))),
        control_map_at_r: mean_of(defined.iter().map(|o| o.control_map_at_r().unwrap_or(0.0))),
    }
}

/// Everything produced for one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub stores: SplitStores,
    pub records: Vec<TrialRecord>,
    pub first_ops: OpCounter,
}

/// Splits with `seed` and evaluates every query; trials run in parallel and
/// come back in query order.
pub fn run_seed(dataset: &Dataset, config: &EvalConfig, seed: u64) -> Result<SeedRun> {
    let split = split_corpus(dataset.corpus(), seed)?;
    let stores = SplitStores::new(dataset, split)?;
    let per_query: Vec<(Vec<TrialRecord>, OpCounter)> = stores
        .split
        .query
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let mut ops = OpCounter::new();
            evaluate_query(dataset, &stores, id, i, config, &mut ops).map(|r| (r, ops))
        })
        .collect::<Result<_>>()?;
    let mut first_ops = OpCounter::new();
    let mut records = Vec::new();
    for (r, ops) in per_query {
        first_ops.merge(&ops);
        records.extend(r);
    }
    Ok(SeedRun {
        stores,
        records,
        first_ops,
    })
}

/// Filters the dataset, then evaluates the task once per seed and
/// aggregates mean and population standard deviation across seeds.
pub fn run_task(dataset: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let dataset = filter_dataset(dataset, config.min_caption_count)?;
    let mut ks = config.k.clone();
    ks.sort_unstable();
    ks.dedup();

    let mut per_seed = Vec::with_capacity(config.seeds.len());
    let mut outcomes = Vec::new();
    let mut ops = OpCounts {
        first_retrieval: OpCounter::new(),
        refined: OpCounter::new(),
        control: OpCounter::new(),
        refined_retrievals: 0,
        control_retrievals: 0,
        eval_ratio: f64::NAN,
    };
    for &seed in &config.seeds {
        let run = run_seed(&dataset, config, seed)?;
        per_seed.push(seed_result(seed, run.stores.split.query.len(), &run.records, &ks));
        ops.first_retrieval.merge(&run.first_ops);
        for r in &run.records {
            ops.refined.merge(&r.refined_ops);
            ops.control.merge(&r.control_ops);
        }
        ops.refined_retrievals += run.records.len() as u64;
        ops.control_retrievals += run.records.len() as u64;
        outcomes.extend(run.records.into_iter().map(|r| r.outcome));
    }
    if ops.control.similarity_evals > 0 {
        ops.eval_ratio = ops.refined.similarity_evals as f64 / ops.control.similarity_evals as f64;
    }

    let arm = |recall: fn(&SeedResult) -> &BTreeMap<usize, f64>, map: fn(&SeedResult) -> f64| {
        ArmReport {
            per_k: ks
                .iter()
                .map(|k| {
                    let vals: Vec<f64> = per_seed.iter().map(|s| recall(s)[k]).collect();
                    (*k, aggregate(&vals))
                })
                .collect(),
            map_at_r: aggregate(&per_seed.iter().map(map).collect::<Vec<_>>()),
        }
    };
    let refined = arm(|s| &s.refined_recall, |s| s.refined_map_at_r);
    let control = arm(|s| &s.control_recall, |s| s.control_map_at_r);

    let (feedback_correlation, scatter) = match feedback_correlation(&outcomes) {
        Ok(c) => (Some(c.pearson_r), c.points),
        Err(_) => (None, Vec::new()),
    };
    Ok(EvalReport {
        task: config.task,
        m: config.m,
        k: ks,
        khat: config.khat,
        seeds: config.seeds.clone(),
        flip_prob: config.flip_prob,
        std: "population".into(),
        refined,
        control,
        trials: per_seed.iter().map(|s| s.trials).sum(),
        failures: per_seed.iter().map(|s| s.failures).sum(),
        per_seed,
        op_counts: ops,
        feedback_correlation,
        scatter,
    })
}
