//! Retrieval metrics over per-rank positivity flags.
//!
//! A ranked result is represented by `&[bool]`: entry `i` says whether the
//! item at rank `i + 1` is positive. A failed refined retrieval is an empty
//! slice, and ranks past the end of a short list count as non-positive.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything needed to score one trial in both arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Positivity per rank of the refined list; `None` when the trial failed.
    pub refined: Option<Vec<bool>>,
    pub control: Vec<bool>,
    pub n_positive_feedback: usize,
    /// Number of positives in the test database.
    pub total_positives: usize,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        self.refined.is_none()
    }

    fn refined_slice(&self) -> &[bool] {
        self.refined.as_deref().unwrap_or(&[])
    }

    pub fn refined_recall(&self, k: usize) -> u32 {
        recall_at_k(self.refined_slice(), k)
    }

    pub fn control_recall(&self, k: usize) -> u32 {
        recall_at_k(&self.control, k)
    }

    pub fn refined_map_at_r(&self) -> Result<f64> {
        map_at_r(self.refined_slice(), self.total_positives)
    }

    pub fn control_map_at_r(&self) -> Result<f64> {
        map_at_r(&self.control, self.total_positives)
    }
}

/// 1 if any of the first `k` ranks is positive, else 0.
pub fn recall_at_k(relevance: &[bool], k: usize) -> u32 {
    assert!(k >= 1, "Recall@K needs k >= 1");
    u32::from(relevance.iter().take(k).any(|&p| p))
}

/// Mean over ranks `1..=r` of precision-at-i, counting only positive ranks.
///
/// `r` is the number of positives in the whole test database.
pub fn map_at_r(relevance: &[bool], r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::UndefinedForZeroR);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &positive) in relevance.iter().take(r).enumerate() {
        if positive {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / r as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation of per-seed values.
pub fn aggregate(per_seed: &[f64]) -> MeanStd {
    assert!(!per_seed.is_empty(), "aggregate needs at least one seed");
    let n = per_seed.len() as f64;
    let mean = per_seed.iter().sum::<f64>() / n;
    let var = per_seed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// One query's positive-feedback count and refined MAP@R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPoint {
    pub n_pos: usize,
    pub map_at_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pearson_r: f64,
    pub points: Vec<FeedbackPoint>,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "correlation needs at least two points".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateVariance("positive-feedback count"));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateVariance("MAP@R"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between positive-feedback count and refined MAP@R.
///
/// Outcomes with `R = 0` are skipped.
pub fn feedback_correlation(outcomes: &[TrialOutcome]) -> Result<Correlation> {
    let points: Vec<FeedbackPoint> = outcomes
        .iter()
        .filter_map(|o| {
            o.refined_map_at_r().ok().map(|map| FeedbackPoint {
                n_pos: o.n_positive_feedback,
                map_at_r: map,
            })
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.n_pos as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.map_at_r).collect();
    let pearson_r = pearson(&xs, &ys)?;
    Ok(Correlation { pearson_r, points })
}

/// Writes scatter points as CSV with header `n_pos,map_at_r`.
pub fn write_scatter_csv<W: Write>(points: &[FeedbackPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n_pos,map_at_r")?;
    for p in points {
        writeln!(out, "{},{}", p.n_pos, p.map_at_r)?;
    }
    Ok(())
}
