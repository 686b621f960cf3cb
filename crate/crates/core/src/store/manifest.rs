//! JSON-lines label manifests.
//!
//! One object per line with fields `id`, `labels`, and optional `adj`,
//! `noun`, `image_uri`. Line `i` describes row `i` of the companion `.rfe`.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledItem {
    pub id: String,
    pub labels: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adj: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noun: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_uri: Option<String>,
}

impl LabeledItem {
    pub fn new(id: impl Into<String>, labels: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            id: id.into(),
            labels: labels.into_iter().map(Into::into).collect(),
            adj: None,
            noun: None,
            image_uri: None,
        }
    }

    /// The item's full label set rendered as one canonical string.
    pub fn caption(&self) -> String {
        self.labels.iter().cloned().collect::<Vec<_>>().join(" ")
    }
}

/// Items in manifest order, each with a label set and optional
/// adjective/noun pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCorpus {
    items: Vec<LabeledItem>,
    lookup: HashMap<String, usize>,
}

impl LabeledCorpus {
    pub fn new(items: Vec<LabeledItem>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            validate_pair(item, i + 1)?;
            if lookup.insert(item.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(item.id.clone()));
            }
        }
        Ok(Self { items, lookup })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[LabeledItem] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&LabeledItem> {
        self.lookup.get(id).map(|&i| &self.items[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.items.iter().map(|it| it.id.as_str())
    }

    pub fn into_items(self) -> Vec<LabeledItem> {
        self.items
    }
}

fn validate_pair(item: &LabeledItem, line: usize) -> Result<()> {
    for (field, value) in [("adj", &item.adj), ("noun", &item.noun)] {
        if let Some(v) = value {
            if !item.labels.contains(v) {
                return Err(Error::MissingField {
                    line,
                    field: "labels",
                    reason: format!("{field} {v:?} is not among the item's labels"),
                });
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    labels: Option<Vec<String>>,
    adj: Option<String>,
    noun: Option<String>,
    image_uri: Option<String>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses a manifest, trimming label strings but preserving their case.
/// Blank lines are skipped.
pub fn read_manifest<R: BufRead>(reader: R) -> Result<LabeledCorpus> {
    let mut items = Vec::new();
    let mut lookup = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<manifest>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|source| {
            Error::ManifestSyntax {
                line: lineno,
                source,
            }
        })?;
        let id = raw.id.ok_or_else(|| Error::MissingField {
            line: lineno,
            field: "id",
            reason: "required".into(),
        })?;
        let labels = raw.labels.ok_or_else(|| Error::MissingField {
            line: lineno,
            field: "labels",
            reason: "required".into(),
        })?;
        let trim = |s: String| s.trim().to_string();
        let item = LabeledItem {
            id,
            labels: labels.into_iter().map(trim).collect(),
            adj: raw.adj.map(trim),
            noun: raw.noun.map(trim),
            image_uri: raw.image_uri,
        };
        validate_pair(&item, lineno)?;
        if lookup.insert(item.id.clone(), items.len()).is_some() {
            return Err(Error::DuplicateId(item.id));
        }
        items.push(item);
    }
    Ok(LabeledCorpus { items, lookup })
}

pub fn write_manifest(corpus: &LabeledCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        for item in corpus.items() {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    write(&mut writer).map_err(|e| Error::io(path, e))
}
