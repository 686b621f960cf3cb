//! Feature matrices, label manifests, and the pairing between them.

mod dataset;
mod manifest;
mod rfe;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::Dataset;
pub use manifest::{load_manifest, read_manifest, write_manifest, LabeledCorpus, LabeledItem};
pub use rfe::{
    load_embeddings, read_embeddings, write_embeddings, write_embeddings_to, HEADER_LEN, MAGIC,
    VERSION,
};

/// Rows whose L2 norm falls below this are rejected as zero vectors.
pub const ZERO_NORM: f64 = 1e-12;

/// Maximum deviation of a stored vector's L2 norm from 1.
///
/// Rows already within this band are kept as-is, which makes normalization
/// idempotent and lets a written store load back bit-exactly.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Name and output dimension of the encoder that produced a feature store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub encoder_name: String,
    pub dim: usize,
    pub preprocessing: String,
}

impl EncoderSpec {
    pub fn check(&self, store: &FeatureStore) -> Result<()> {
        if self.dim != store.dim() {
            return Err(Error::DimMismatch {
                what: "encoder dim",
                expected: self.dim as u64,
                found: store.dim() as u64,
            });
        }
        Ok(())
    }
}

/// L2 norm accumulated in f64.
pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// Scales `row` to unit length in place.
///
/// Returns `None` for zero (or non-finite) rows, which are left untouched.
pub(crate) fn normalize_in_place(row: &mut [f32]) -> Option<()> {
    let norm = l2_norm(row);
    if !norm.is_finite() || norm < ZERO_NORM {
        return None;
    }
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        for x in row.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
    Some(())
}

/// Immutable matrix of unit-length feature vectors with stable item ids.
///
/// Rows are stored contiguously in row-major order; `row_index` is the
/// position of a vector in that matrix and is the tie-break key for ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    lookup: HashMap<String, usize>,
}

impl FeatureStore {
    /// Builds a store from a row-major matrix, normalizing every row.
    pub fn new(dim: usize, ids: Vec<String>, mut data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".into()));
        }
        let expected = ids.len() as u64 * dim as u64;
        if data.len() as u64 != expected {
            return Err(Error::DimMismatch {
                what: "matrix length",
                expected,
                found: data.len() as u64,
            });
        }
        let lookup = build_lookup(&ids)?;
        for (row, chunk) in data.chunks_exact_mut(dim).enumerate() {
            if chunk.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    id: ids[row].clone(),
                });
            }
            normalize_in_place(chunk).ok_or_else(|| Error::ZeroVector {
                row,
                id: ids[row].clone(),
            })?;
        }
        Ok(Self {
            dim,
            ids,
            data,
            lookup,
        })
    }

    pub fn from_rows<I>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (id, v) in rows {
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    what: "vector dim",
                    expected: dim as u64,
                    found: v.len() as u64,
                });
            }
            ids.push(id);
            data.extend_from_slice(&v);
        }
        Self::new(dim, ids, data)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> &str {
        &self.ids[row]
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    /// Row-major view of the whole matrix.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = (usize, &str, &[f32])> + '_ {
        self.ids
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .enumerate()
            .map(|(row, (id, v))| (row, id.as_str(), v))
    }

    /// Replaces the ids of every row, keeping the vectors.
    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.ids.len() {
            return Err(Error::IdMismatch(format!(
                "{} vectors but {} ids",
                self.ids.len(),
                ids.len()
            )));
        }
        self.lookup = build_lookup(&ids)?;
        self.ids = ids;
        Ok(self)
    }

    /// Copies the given rows, in the given order, into a new store.
    pub fn subset(&self, rows: &[usize]) -> FeatureStore {
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &row in rows {
            ids.push(self.ids[row].clone());
            data.extend_from_slice(self.vector(row));
        }
        let lookup = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect::<HashMap<_, _>>();
        assert_eq!(lookup.len(), ids.len(), "subset rows must be distinct");
        FeatureStore {
            dim: self.dim,
            ids,
            data,
            lookup,
        }
    }
}

fn build_lookup(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut lookup = HashMap::with_capacity(ids.len());
    for (row, id) in ids.iter().enumerate() {
        if lookup.insert(id.clone(), row).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(lookup)
}
