use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::store::{Dataset, LabeledCorpus, LabeledItem};

pub const DEFAULT_MIN_CAPTION_COUNT: usize = 5;

/// Adjective value that marks an item as unusable.
pub const PLACEHOLDER_ADJ: &str = "adj";

/// Predicate accepting items whose full label set occurs on at least
/// `min_caption_count` items and whose adjective is not the placeholder.
///
/// Caption counts are taken over the whole input.
fn keep_predicate<'a, I>(items: I, min_caption_count: usize) -> impl Fn(&LabeledItem) -> bool
where
    I: IntoIterator<Item = &'a LabeledItem>,
{
    let mut counts: HashMap<BTreeSet<String>, usize> = HashMap::new();
    for item in items {
        *counts.entry(item.labels.clone()).or_default() += 1;
    }
    move |item: &LabeledItem| {
        counts.get(&item.labels).copied().unwrap_or(0) >= min_caption_count
            && item.adj.as_deref() != Some(PLACEHOLDER_ADJ)
    }
}

pub fn filter_corpus(corpus: &LabeledCorpus, min_caption_count: usize) -> Result<LabeledCorpus> {
    let keep = keep_predicate(corpus.items(), min_caption_count);
    let items: Vec<LabeledItem> = corpus.items().iter().filter(|it| keep(it)).cloned().collect();
    if items.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    LabeledCorpus::new(items)
}

/// [`filter_corpus`] applied to a paired dataset, keeping vectors aligned.
pub fn filter_dataset(dataset: &Dataset, min_caption_count: usize) -> Result<Dataset> {
    let keep = keep_predicate(dataset.corpus().items(), min_caption_count);
    let out = dataset.retain(keep)?;
    if out.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(spec: &[(&[&str], usize)]) -> LabeledCorpus {
        let mut items = Vec::new();
        for (labels, n) in spec {
            for _ in 0..*n {
                items.push(LabeledItem::new(format!("i{}", items.len()), labels.iter().copied()));
            }
        }
        LabeledCorpus::new(items).unwrap()
    }

    #[test]
    fn rare_caption_is_dropped() {
        let c = corpus(&[(&["molten", "orange"], 2), (&["ripe", "apple"], 6)]);
        let out = filter_corpus(&c, 5).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.items().iter().all(|it| it.labels.contains("apple")));
    }

    #[test]
    fn caption_with_exactly_min_items_is_kept() {
        let c = corpus(&[(&["wet", "dog"], 5)]);
        assert_eq!(filter_corpus(&c, 5).unwrap().len(), 5);
    }

    #[test]
    fn caption_is_the_whole_label_set() {
        // "ripe apple" and "apple" are different captions
        let c = corpus(&[(&["ripe", "apple"], 3), (&["apple"], 3)]);
        assert!(matches!(filter_corpus(&c, 5), Err(Error::EmptyAfterFilter)));
    }

    #[test]
    fn placeholder_adjective_is_dropped() {
        let mut items: Vec<LabeledItem> = (0..5)
            .map(|i| {
                let mut it = LabeledItem::new(format!("a{i}"), ["adj", "car"]);
                it.adj = Some("adj".into());
                it.noun = Some("car".into());
                it
            })
            .collect();
        items.extend((0..5).map(|i| {
            let mut it = LabeledItem::new(format!("b{i}"), ["old", "car"]);
            it.adj = Some("old".into());
            it
        }));
        let out = filter_corpus(&LabeledCorpus::new(items).unwrap(), 5).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.items().iter().all(|it| it.adj.as_deref() == Some("old")));
    }
}
