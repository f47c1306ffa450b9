//! COCO-style annotation files and COCO-results detection lists.
//!
//! Field order in the structs below is the key order written to disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    /// `[x, y, width, height]` in pixels.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub iscrowd: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    #[serde(default)]
    pub images: Vec<CocoImage>,
    #[serde(default)]
    pub annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    pub categories: Vec<CocoCategory>,
}

/// One entry of a COCO-results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoResult {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    pub score: f64,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Bidirectional category name/id table; ids start at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTable {
    names: Vec<String>,
}

impl CategoryTable {
    pub fn new(names: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::ConfigInvalid(format!("duplicate category {n:?}")));
            }
        }
        Ok(Self { names })
    }

    pub fn id_of(&self, name: &str) -> Result<u64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| i as u64 + 1)
            .ok_or_else(|| Error::UnknownCategory(name.to_string()))
    }

    pub fn name_of(&self, id: u64) -> Result<&str> {
        id.checked_sub(1)
            .and_then(|i| self.names.get(i as usize))
            .map(String::as_str)
            .ok_or_else(|| Error::UnknownCategory(format!("id {id}")))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn to_coco(&self) -> Vec<CocoCategory> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| CocoCategory {
                id: i as u64 + 1,
                name: n.clone(),
            })
            .collect()
    }

    pub fn from_coco(categories: &[CocoCategory]) -> Result<Self> {
        let mut sorted = categories.to_vec();
        sorted.sort_by_key(|c| c.id);
        for (i, c) in sorted.iter().enumerate() {
            if c.id != i as u64 + 1 {
                return Err(Error::ConfigInvalid(format!(
                    "category ids must be 1..=n, found {}",
                    c.id
                )));
            }
        }
        Self::new(sorted.into_iter().map(|c| c.name))
    }
}
