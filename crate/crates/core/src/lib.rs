//! Synthetic-data pipeline for few-shot object detection.
//!
//! Stages: prompt generation, candidate selection over image embeddings,
//! copy-paste composition onto base backgrounds, false-positive filtering of
//! detector output with a text-image similarity model, and COCO-style
//! evaluation. Model inference itself is out of scope: embeddings arrive as
//! EMB1 files, masks as 8-bit PNGs, detections as COCO results.

pub mod coco;
pub mod compositor;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod filter;
pub mod fixture;
pub mod geometry;
pub mod pipeline;
pub mod prompts;
pub mod rng;
pub mod selector;

pub use embedding::{EmbeddingMatrix, Manifest, ManifestEntry};
pub use error::{Error, Result};
pub use geometry::{BBox, Rect};
pub use pipeline::{PipelineConfig, run_pipeline};
pub use selector::{SelectionConfig, Strategy};
