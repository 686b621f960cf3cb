use std::path::Path;

use crate::error::{Error, Result};
use crate::store::{load_embeddings, load_manifest, FeatureStore, LabeledCorpus, LabeledItem};

/// A feature store paired one-to-one with its label manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    store: FeatureStore,
    corpus: LabeledCorpus,
    // store row -> corpus index
    item_of_row: Vec<usize>,
}

impl Dataset {
    /// Pairs a store with a corpus. The two id sets must be equal.
    pub fn new(store: FeatureStore, corpus: LabeledCorpus) -> Result<Self> {
        if store.len() != corpus.len() {
            return Err(Error::IdMismatch(format!(
                "{} vectors but {} manifest entries",
                store.len(),
                corpus.len()
            )));
        }
        let item_of_row = store
            .ids()
            .iter()
            .map(|id| {
                corpus.index_of(id).ok_or_else(|| {
                    Error::IdMismatch(format!("vector id {id:?} has no manifest entry"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            store,
            corpus,
            item_of_row,
        })
    }

    /// Loads an `.rfe` file and its manifest; row `i` takes the id on line `i`.
    pub fn load(embeddings: impl AsRef<Path>, manifest: impl AsRef<Path>) -> Result<Self> {
        let corpus = load_manifest(manifest)?;
        let store = load_embeddings(embeddings)?;
        if store.len() != corpus.len() {
            return Err(Error::IdMismatch(format!(
                "{} vectors but {} manifest entries",
                store.len(),
                corpus.len()
            )));
        }
        let ids = corpus.ids().map(str::to_owned).collect();
        let store = store.with_ids(ids)?;
        Self::new(store, corpus)
    }

    pub fn store(&self) -> &FeatureStore {
        &self.store
    }

    pub fn corpus(&self) -> &LabeledCorpus {
        &self.corpus
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn item(&self, row: usize) -> &LabeledItem {
        &self.corpus.items()[self.item_of_row[row]]
    }

    pub fn get(&self, id: &str) -> Option<(usize, &LabeledItem)> {
        let row = self.store.row_of(id)?;
        Some((row, self.item(row)))
    }

    /// Keeps the items accepted by `keep`, preserving store row order.
    pub fn retain(&self, mut keep: impl FnMut(&LabeledItem) -> bool) -> Result<Dataset> {
        let rows: Vec<usize> = (0..self.len()).filter(|&r| keep(self.item(r))).collect();
        let store = self.store.subset(&rows);
        let items = rows.iter().map(|&r| self.item(r).clone()).collect();
        Dataset::new(store, LabeledCorpus::new(items)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(ids: &[&str]) -> FeatureStore {
        let data = (0..ids.len()).flat_map(|i| [1.0, i as f32]).collect();
        FeatureStore::new(2, ids.iter().map(|s| s.to_string()).collect(), data).unwrap()
    }

    fn corpus(ids: &[&str]) -> LabeledCorpus {
        LabeledCorpus::new(ids.iter().map(|id| LabeledItem::new(*id, ["x"])).collect()).unwrap()
    }

    #[test]
    fn pairing_accepts_equal_id_sets_in_any_order() {
        let ds = Dataset::new(store(&["a", "b"]), corpus(&["b", "a"])).unwrap();
        assert_eq!(ds.item(0).id, "a");
        assert_eq!(ds.item(1).id, "b");
    }

    #[test]
    fn pairing_fails_on_different_id_sets() {
        assert!(matches!(
            Dataset::new(store(&["a", "b"]), corpus(&["a", "c"])),
            Err(Error::IdMismatch(_))
        ));
        assert!(matches!(
            Dataset::new(store(&["a", "b"]), corpus(&["a"])),
            Err(Error::IdMismatch(_))
        ));
    }

    #[test]
    fn retain_keeps_rows_aligned() {
        let ds = Dataset::new(store(&["a", "b", "c"]), corpus(&["a", "b", "c"])).unwrap();
        let kept = ds.retain(|it| it.id != "b").unwrap();
        assert_eq!(kept.store().ids(), &["a", "c"]);
        assert_eq!(kept.item(1).id, "c");
        assert_eq!(kept.store().vector(1), ds.store().vector(2));
    }
}
