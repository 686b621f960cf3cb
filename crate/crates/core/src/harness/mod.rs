//! Simulated-feedback evaluation: filtering, stratified splits, trials,
//! synthetic corpora and the per-task driver.

pub mod filter;
pub mod run;
pub mod split;
pub mod synth;
pub mod trial;

pub use filter::{filter_corpus, filter_dataset, DEFAULT_MIN_CAPTION_COUNT, PLACEHOLDER_ADJ};
pub use run::{
    evaluate_query, run_seed, run_task, ArmReport, EvalConfig, EvalReport, Khat, OpCounts,
    SeedResult, SeedRun, SplitStores, TrialRecord,
};
pub use split::{allocate, split_corpus, Split, StratumAllocation, MIN_STRATUM, SPLIT_RATIO};
pub use synth::{class_means, generate_synthetic_corpus, SyntheticCorpusSpec};
pub use trial::{enumerate_trials, simulate_feedback, TaskKind, TaskTrial, Target, TrialContext};
