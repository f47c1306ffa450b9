//! False-positive filtering of detections by CLIP score.
//!
//! Each detection's crop embedding is compared with the text embedding of
//! every name on the category list; a softmax over those cosine similarities
//! gives the score at the predicted category, and detections scoring below
//! the threshold are removed.

use serde::{Deserialize, Serialize};

use crate::coco::{CategoryTable, CocoResult};
use crate::embedding::{cosine_sim, EmbeddingMatrix, Manifest};
use crate::error::{Error, Result};
use crate::geometry::Rect;

pub const DEFAULT_CLIP_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub bbox: Rect,
    pub category: String,
    pub confidence: f64,
}

impl Detection {
    pub fn from_coco(r: &CocoResult, table: &CategoryTable) -> Result<Self> {
        if !r.score.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "non-finite detection score on image {}",
                r.image_id
            )));
        }
        Ok(Self {
            image_id: r.image_id,
            bbox: Rect::from_xywh(r.bbox)?,
            category: table.name_of(r.category_id)?.to_string(),
            confidence: r.score,
        })
    }

    pub fn to_coco(&self, table: &CategoryTable) -> Result<CocoResult> {
        Ok(CocoResult {
            image_id: self.image_id,
            category_id: table.id_of(&self.category)?,
            bbox: self.bbox.to_xywh(),
            score: self.confidence,
        })
    }
}

pub fn detections_from_coco(results: &[CocoResult], table: &CategoryTable) -> Result<Vec<Detection>> {
    results.iter().map(|r| Detection::from_coco(r, table)).collect()
}

pub fn detections_to_coco(dets: &[Detection], table: &CategoryTable) -> Result<Vec<CocoResult>> {
    dets.iter().map(|d| d.to_coco(table)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ListMode {
    /// Score against novel names only; base-class detections pass through.
    #[serde(rename = "novel")]
    NovelOnly,
    #[default]
    #[serde(rename = "all")]
    BaseAndNovel,
}

impl std::str::FromStr for ListMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "novel" => Ok(ListMode::NovelOnly),
            "all" => Ok(ListMode::BaseAndNovel),
            other => Err(Error::ConfigInvalid(format!("unknown list mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_threshold")]
    pub clip_thresh: f64,
    #[serde(default)]
    pub list_mode: ListMode,
    /// Cosines are divided by this before the softmax; 1 leaves them raw.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_CLIP_THRESHOLD
}

fn default_temperature() -> f64 {
    1.0
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            clip_thresh: DEFAULT_CLIP_THRESHOLD,
            list_mode: ListMode::BaseAndNovel,
            temperature: 1.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.clip_thresh) {
            return Err(Error::ConfigInvalid(format!(
                "clip threshold {} outside [0, 1]",
                self.clip_thresh
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Category names with one normalized text embedding each, plus the names
/// that bypass scoring.
#[derive(Debug, Clone)]
pub struct TextBank {
    names: Vec<String>,
    embeddings: EmbeddingMatrix,
    passthrough: Vec<String>,
}

impl TextBank {
    pub fn new(names: Vec<String>, embeddings: EmbeddingMatrix, passthrough: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::ConfigInvalid(format!(
                "category list needs at least 2 names, got {}",
                names.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::ConfigInvalid(format!("duplicate category {n:?}")));
            }
        }
        if embeddings.count() != names.len() {
            return Err(Error::AlignmentMismatch {
                detections: names.len(),
                rows: embeddings.count(),
            });
        }
        let embeddings = if embeddings.is_normalized() {
            embeddings
        } else {
            embeddings.l2_normalize()?
        };
        Ok(Self {
            names,
            embeddings,
            passthrough,
        })
    }

    /// Builds the list for `mode` from a text embedding file. For every name
    /// the row whose text (`image_id`) is the bare name is preferred, else the
    /// first row of that category.
    pub fn from_manifest(
        base: &[String],
        novel: &[String],
        mode: ListMode,
        embeddings: &EmbeddingMatrix,
        manifest: &Manifest,
    ) -> Result<Self> {
        manifest.check_matches(embeddings)?;
        let (names, passthrough): (Vec<String>, Vec<String>) = match mode {
            ListMode::BaseAndNovel => (base.iter().chain(novel).cloned().collect(), Vec::new()),
            ListMode::NovelOnly => (novel.to_vec(), base.to_vec()),
        };
        let rows = names
            .iter()
            .map(|n| {
                let entries = manifest.entries();
                entries
                    .iter()
                    .find(|e| &e.category == n && &e.image_id == n)
                    .or_else(|| entries.iter().find(|e| &e.category == n))
                    .map(|e| e.row_index)
                    .ok_or_else(|| Error::UnknownCategory(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(names, embeddings.select_rows(&rows)?, passthrough)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Softmax over `cos(crop, text_i) / temperature` for every list entry.
pub fn clip_scores(crop: &[f32], texts: &EmbeddingMatrix, temperature: f64) -> Result<Vec<f64>> {
    let logits = texts
        .rows()
        .map(|t| cosine_sim(crop, t).map(|c| c / temperature))
        .collect::<Result<Vec<f64>>>()?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn clip_score(crop: &[f32], texts: &EmbeddingMatrix, target: usize) -> Result<f64> {
    if target >= texts.count() {
        return Err(Error::IndexOutOfRange {
            index: target,
            len: texts.count(),
        });
    }
    Ok(clip_scores(crop, texts, 1.0)?[target])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDetection {
    pub detection: Detection,
    pub clip_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<Detection>,
    /// Score of each kept detection; `None` when it bypassed scoring.
    pub kept_scores: Vec<Option<f64>>,
    pub removed: Vec<ScoredDetection>,
}

/// Keeps a detection iff its score at the predicted category is at least
/// the threshold. `crops` row `i` belongs to `dets[i]`.
pub fn filter_detections(
    dets: &[Detection],
    crops: &EmbeddingMatrix,
    bank: &TextBank,
    cfg: &FilterConfig,
) -> Result<FilterOutcome> {
    cfg.validate()?;
    if dets.len() != crops.count() {
        return Err(Error::AlignmentMismatch {
            detections: dets.len(),
            rows: crops.count(),
        });
    }
    if crops.count() > 0 && crops.dim() != bank.embeddings.dim() {
        return Err(Error::DimMismatch {
            left: crops.dim(),
            right: bank.embeddings.dim(),
        });
    }
    let mut out = FilterOutcome::default();
    for (i, det) in dets.iter().enumerate() {
        let Some(target) = bank.index_of(&det.category) else {
            if bank.passthrough.contains(&det.category) {
                out.kept.push(det.clone());
                out.kept_scores.push(None);
                continue;
            }
            return Err(Error::UnknownCategory(det.category.clone()));
        };
        let score = clip_scores(crops.row(i), &bank.embeddings, cfg.temperature)?[target];
        if score >= cfg.clip_thresh {
            out.kept.push(det.clone());
            out.kept_scores.push(Some(score));
        } else {
            out.removed.push(ScoredDetection {
                detection: det.clone(),
                clip_score: score,
            });
        }
    }
    Ok(out)
}

/// Removed-set report entry: COCO-results fields plus the CLIP score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedRecord {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    pub score: f64,
    pub clip_score: f64,
}

pub fn removed_records(removed: &[ScoredDetection], table: &CategoryTable) -> Result<Vec<RemovedRecord>> {
    removed
        .iter()
        .map(|r| {
            let c = r.detection.to_coco(table)?;
            Ok(RemovedRecord {
                image_id: c.image_id,
                category_id: c.category_id,
                bbox: c.bbox,
                score: c.score,
                clip_score: r.clip_score,
            })
        })
        .collect()
}
