//! Gaussian-cluster corpora standing in for real encoder features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{Dataset, FeatureStore, LabeledCorpus, LabeledItem};

const REPULSION_ITERS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub dim: usize,
    /// Minimum Euclidean distance between any two unit-length class means.
    pub class_separation: f64,
    /// Per-coordinate standard deviation of the noise added to a class mean.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticCorpusSpec {
    pub fn class_name(class: usize) -> String {
        format!("class-{class:02}")
    }

    fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.samples_per_class == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter(
                "class count, samples per class and dim must be positive".into(),
            ));
        }
        if self.class_separation.is_nan() || self.class_separation <= 0.0 {
            return Err(Error::InvalidParameter("class separation must be positive".into()));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter("noise sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        let (store, corpus) = generate_synthetic_corpus(self)?;
        Dataset::new(store, corpus)
    }
}

fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(distance(&points[i], &points[j]));
        }
    }
    best
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if v.iter().any(|x| *x != 0.0) {
            normalize(&mut v);
            return v;
        }
    }
}

/// Unit-sphere class means with pairwise distance at least the separation.
///
/// Starts from random directions and, if they are too close, spreads them by
/// gradient steps on a short-range repulsion energy.
pub fn class_means(spec: &SyntheticCorpusSpec, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let n = spec.n_classes;
    let sep = spec.class_separation;
    let infeasible = || Error::SeparationInfeasible {
        classes: n,
        dim: spec.dim,
        separation: sep,
    };
    // Regular-simplex bound on the minimum distance of n unit vectors.
    let bound = if n < 2 {
        2.0
    } else {
        (2.0 * n as f64 / (n as f64 - 1.0)).sqrt()
    };
    if sep > bound || (spec.dim == 1 && n > 2) {
        return Err(infeasible());
    }

    let mut points: Vec<Vec<f64>> = (0..n).map(|_| random_unit(spec.dim, rng)).collect();
    if n < 2 {
        return Ok(points);
    }
    let mut step = 0.1;
    for _ in 0..REPULSION_ITERS {
        if min_pairwise_distance(&points) >= sep {
            return Ok(points);
        }
        let forces: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut f = vec![0.0; spec.dim];
                for j in (0..n).filter(|&j| j != i) {
                    let d = distance(&points[i], &points[j]).max(1e-9);
                    let w = d.powi(-8);
                    for (fk, (a, b)) in f.iter_mut().zip(points[i].iter().zip(&points[j])) {
                        *fk += w * (a - b);
                    }
                }
                f
            })
            .collect();
        let max_force = forces
            .iter()
            .map(|f| f.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if max_force == 0.0 {
            break;
        }
        for (p, f) in points.iter_mut().zip(&forces) {
            for (x, fx) in p.iter_mut().zip(f) {
                *x += step * fx / max_force;
            }
            normalize(p);
        }
        step = (step * 0.9995).max(1e-4);
    }
    if min_pairwise_distance(&points) >= sep {
        Ok(points)
    } else {
        Err(infeasible())
    }
}

/// Samples `samples_per_class` noisy copies of each class mean.
///
/// Items are ordered class by class; ids are `cNN-sMMM` and each item's
/// single label is its class name.
pub fn generate_synthetic_corpus(spec: &SyntheticCorpusSpec) -> Result<(FeatureStore, LabeledCorpus)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = class_means(spec, &mut rng)?;
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let total = spec.n_classes * spec.samples_per_class;
    let mut ids = Vec::with_capacity(total);
    let mut items = Vec::with_capacity(total);
    let mut data = Vec::with_capacity(total * spec.dim);
    for (class, mean) in means.iter().enumerate() {
        let label = SyntheticCorpusSpec::class_name(class);
        for s in 0..spec.samples_per_class {
            let id = format!("c{class:02}-s{s:03}");
            loop {
                let v: Vec<f64> = mean.iter().map(|m| m + noise.sample(&mut rng)).collect();
                if v.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
                    data.extend(v.iter().map(|&x| x as f32));
                    break;
                }
            }
            items.push(LabeledItem::new(id.clone(), [label.clone()]));
            ids.push(id);
        }
    }
    let store = FeatureStore::new(spec.dim, ids, data)?;
    Ok((store, LabeledCorpus::new(items)?))
}
