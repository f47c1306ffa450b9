//! Embedding matrices in the EMB1 binary format, their JSON-lines manifests,
//! and the cosine-similarity primitives the rest of the crate builds on.
//!
//! EMB1 layout: the magic bytes `EMB1`, a little-endian `u32` row count, a
//! little-endian `u32` dimension, then `count * dim` little-endian `f32`
//! values in row-major order. Nothing follows the payload.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

/// Row-major `count x dim` matrix of `f32` feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    count: usize,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major data, rejecting NaN/Inf.
    pub fn new(count: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != count * dim {
            return Err(Error::TruncatedData {
                expected: count * dim * 4,
                found: data.len() * 4,
            });
        }
        if count > 0 && dim == 0 {
            return Err(Error::MalformedHeader("dim must be positive".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            count,
            dim,
            data,
            normalized: false,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        (0..self.count).map(move |i| self.row(i))
    }

    /// Keeps only the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.count {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.count,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            count: indices.len(),
            dim: self.dim,
            data,
            normalized: self.normalized,
        })
    }

    pub fn read_from<R: Read>(mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io("<reader>", e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::MalformedHeader(format!(
                "need {HEADER_LEN} header bytes, found {}",
                bytes.len()
            )));
        }
        if &bytes[..4] != EMB1_MAGIC {
            return Err(Error::MalformedHeader(format!(
                "bad magic {:?}",
                &bytes[..4]
            )));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let payload = &bytes[HEADER_LEN..];
        let expected = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::MalformedHeader("count*dim overflows".into()))?;
        if payload.len() < expected {
            return Err(Error::TruncatedData {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::MalformedHeader(format!(
                "{} trailing bytes after payload",
                payload.len() - expected
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(count, dim, data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(EMB1_MAGIC);
        out.extend_from_slice(&(self.count as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Divides every row by its Euclidean norm.
    pub fn l2_normalize(&self) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows().enumerate() {
            let norm = norm(row);
            if norm == 0.0 {
                return Err(Error::ZeroNormRow(i));
            }
            data.extend(row.iter().map(|&v| (v as f64 / norm) as f32));
        }
        Ok(Self {
            count: self.count,
            dim: self.dim,
            data,
            normalized: true,
        })
    }

    /// Mean of the given rows (all rows when `None`), rescaled to unit norm.
    pub fn normalized_mean(&self, rows: Option<&[usize]>) -> Result<Vec<f32>> {
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..self.count).collect();
                &all
            }
        };
        if rows.is_empty() {
            return Err(Error::PoolTooSmall {
                pool: 0,
                requested: 1,
            });
        }
        let mut acc = vec![0f64; self.dim];
        for &i in rows {
            for (a, &v) in acc.iter_mut().zip(self.row(i)) {
                *a += v as f64;
            }
        }
        let n = rows.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        let len = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
        if len == 0.0 {
            return Err(Error::ZeroNormRow(rows[0]));
        }
        Ok(acc.iter().map(|a| (a / len) as f32).collect())
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity with 64-bit accumulation, clamped to `[-1, 1]`.
pub fn cosine_sim(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(Error::ZeroNormRow(0));
    }
    if nb == 0.0 {
        return Err(Error::ZeroNormRow(1));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Dense `a.count() x b.count()` cosine matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// Every entry is computed independently, so the parallel result matches
/// the sequential one bit for bit.
pub fn pairwise_cosine(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    if a.dim != b.dim {
        return Err(Error::DimMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let b_norms: Vec<f64> = b.rows().map(norm).collect();
    if let Some(j) = b_norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroNormRow(j));
    }
    let rows: Vec<Vec<f64>> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let ra = a.row(i);
            let na = norm(ra);
            if na == 0.0 {
                return Err(Error::ZeroNormRow(i));
            }
            Ok(b
                .rows()
                .zip(&b_norms)
                .map(|(rb, nb)| (dot(ra, rb) / (na * nb)).clamp(-1.0, 1.0))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(SimilarityMatrix {
        rows: a.count,
        cols: b.count,
        values: rows.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Generated,
    Real,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub row_index: usize,
    pub image_id: String,
    pub category: String,
    pub source: Source,
}

/// JSON-lines sidecar binding embedding rows to images (or texts).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Entries are sorted by `row_index`; indices must be exactly `0..n`.
    pub fn new(mut entries: Vec<ManifestEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.row_index);
        let mut ids = HashSet::new();
        for (expected, e) in entries.iter().enumerate() {
            if e.row_index != expected {
                return Err(Error::InvalidManifest(format!(
                    "row_index {} where {expected} was expected",
                    e.row_index
                )));
            }
            if !ids.insert(e.image_id.as_str()) {
                return Err(Error::InvalidManifest(format!(
                    "duplicate image_id {:?}",
                    e.image_id
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<&ManifestEntry> {
        self.entries.get(row)
    }

    pub fn check_matches(&self, m: &EmbeddingMatrix) -> Result<()> {
        if self.len() != m.count() {
            return Err(Error::InvalidManifest(format!(
                "{} manifest entries for {} embedding rows",
                self.len(),
                m.count()
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
        }
        Self::new(entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for e in &self.entries {
            let line = serde_json::to_string(e).map_err(|e| Error::json(path, e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
