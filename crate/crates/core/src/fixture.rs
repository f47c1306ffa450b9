//! Deterministic synthetic asset set for tests, demos and the bundled
//! `fixtures/` directory.
//!
//! Embeddings live in a space where text row `i` is the basis vector `e_i`,
//! so similarities are easy to reason about:
//!
//! * candidates of category `c` sit near their text vector, spread over a few
//!   modes so clustering has structure to find;
//! * true-positive crops point at their own class text;
//! * false-positive crops point at `e_wrong - e_pred`, which drives the
//!   softmax score of the predicted class well under 0.1.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};
use rand::Rng;

use crate::coco::{self, CategoryTable, CocoAnnotation, CocoDataset, CocoImage, CocoResult};
use crate::embedding::{EmbeddingMatrix, Manifest, ManifestEntry, Source};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

pub const VOC_BASE: [&str; 3] = ["aeroplane", "bicycle", "boat"];
pub const VOC_NOVEL: [&str; 5] = ["bird", "bus", "cow", "motorbike", "sofa"];

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub base: Vec<String>,
    pub novel: Vec<String>,
    pub candidates: usize,
    pub modes: usize,
    pub shots: usize,
    pub backgrounds: usize,
    /// Eval images; each holds one ground-truth box per novel class.
    pub eval_images: usize,
    pub candidate_size: (u32, u32),
    pub background_size: (u32, u32),
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            base: VOC_BASE.iter().map(|s| s.to_string()).collect(),
            novel: VOC_NOVEL.iter().map(|s| s.to_string()).collect(),
            candidates: 30,
            modes: 4,
            shots: 1,
            backgrounds: 10,
            eval_images: 10,
            candidate_size: (48, 40),
            background_size: (160, 120),
        }
    }
}

impl FixtureSpec {
    /// One dimension per category, base first.
    pub fn dim(&self) -> usize {
        self.base.len() + self.novel.len()
    }

    fn table(&self) -> Result<CategoryTable> {
        CategoryTable::new(self.base.iter().chain(&self.novel).cloned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSummary {
    pub candidates: usize,
    pub detections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
}

fn noise(rng: &mut StreamRng, amp: f32) -> f32 {
    rng.random_range(-amp..=amp)
}

fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn palette(i: usize) -> [u8; 3] {
    const P: [[u8; 3]; 8] = [
        [200, 40, 40],
        [40, 160, 60],
        [40, 70, 200],
        [210, 160, 30],
        [150, 50, 170],
        [30, 170, 170],
        [120, 80, 40],
        [90, 90, 90],
    ];
    P[i % P.len()]
}

/// A candidate image with one elliptical object and its saliency map: 255
/// inside, a falling ramp across a two-pixel rim, 0 elsewhere.
fn candidate_image(rng: &mut StreamRng, (w, h): (u32, u32), color: [u8; 3]) -> (RgbImage, GrayImage) {
    let rx = rng.random_range(w as f64 * 0.18..w as f64 * 0.42);
    let ry = rng.random_range(h as f64 * 0.18..h as f64 * 0.42);
    let cx = rng.random_range(rx + 1.0..w as f64 - rx - 1.0);
    let cy = rng.random_range(ry + 1.0..h as f64 - ry - 1.0);
    let bg = [
        rng.random_range(215..=250u8),
        rng.random_range(215..=250u8),
        rng.random_range(215..=250u8),
    ];
    let mut img = RgbImage::from_pixel(w, h, Rgb(bg));
    let mut mask = GrayImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            let r = (dx * dx + dy * dy).sqrt();
            if r <= 1.0 {
                let shade = (1.0 - 0.3 * r) as f32;
                let px = color.map(|c| (c as f32 * shade) as u8);
                img.put_pixel(x, y, Rgb(px));
                mask.put_pixel(x, y, Luma([255]));
            } else if r <= 1.25 {
                mask.put_pixel(x, y, Luma([(255.0 * (1.25 - r) / 0.25) as u8]));
            }
        }
    }
    (img, mask)
}

fn background_image(rng: &mut StreamRng, (w, h): (u32, u32)) -> RgbImage {
    let a = [rng.random_range(20..120u8), rng.random_range(20..120u8), rng.random_range(20..120u8)];
    let b = [rng.random_range(120..240u8), rng.random_range(120..240u8), rng.random_range(120..240u8)];
    RgbImage::from_fn(w, h, |x, y| {
        let t = (x + y) as f32 / (w + h) as f32;
        let stripe = if (x / 16 + y / 16) % 2 == 0 { 0.0 } else { 12.0 };
        Rgb([0, 1, 2].map(|c| (a[c] as f32 * (1.0 - t) + b[c] as f32 * t + stripe).min(255.0) as u8))
    })
}

/// Writes the full asset layout described in [`crate::pipeline`] under `dir`,
/// plus a `pipeline.toml` with the default configuration.
pub fn generate(dir: &Path, spec: &FixtureSpec) -> Result<FixtureSummary> {
    let table = spec.table()?;
    let dim = spec.dim();
    let nb = spec.base.len();
    for sub in ["generated", "real", "images", "masks", "backgrounds"] {
        mkdir(&dir.join(sub))?;
    }

    // Text embeddings: basis vectors, one per category, text = name.
    let mut text_rows = Vec::new();
    let mut text_entries = Vec::new();
    for (i, name) in table.names().iter().enumerate() {
        let mut v = vec![0.0f32; dim];
        v[i] = 1.0;
        text_rows.push(v);
        text_entries.push(ManifestEntry {
            row_index: i,
            image_id: name.clone(),
            category: name.clone(),
            source: Source::Text,
        });
    }
    EmbeddingMatrix::from_rows(&text_rows)?.save(dir.join("texts.emb"))?;
    Manifest::new(text_entries)?.save(dir.join("texts.jsonl"))?;

    for (c, name) in spec.novel.iter().enumerate() {
        let axis = nb + c;
        let mut rng = rng::stream(spec.seed, format!("fixture/generated/{name}").as_bytes());
        // Mode offsets along the other axes keep every candidate closest to
        // its own text vector.
        let modes: Vec<Vec<f32>> = (0..spec.modes.max(1))
            .map(|_| (0..dim).map(|d| if d == axis { 0.0 } else { noise(&mut rng, 0.35) }).collect())
            .collect();
        let mut rows = Vec::new();
        let mut entries = Vec::new();
        for i in 0..spec.candidates {
            let mode = &modes[i % modes.len()];
            let v: Vec<f32> = (0..dim)
                .map(|d| if d == axis { 1.0 } else { 0.0 } + mode[d] + noise(&mut rng, 0.03))
                .collect();
            rows.push(v);
            let image_id = format!("{name}_{i:03}");
            let (img, mask) = candidate_image(&mut rng, spec.candidate_size, palette(axis));
            save_rgb(&img, &dir.join("images").join(format!("{image_id}.png")))?;
            save_gray(&mask, &dir.join("masks").join(format!("{image_id}.png")))?;
            entries.push(ManifestEntry {
                row_index: i,
                image_id,
                category: name.clone(),
                source: Source::Generated,
            });
        }
        EmbeddingMatrix::from_rows(&rows)?.save(dir.join("generated").join(format!("{name}.emb")))?;
        Manifest::new(entries)?.save(dir.join("generated").join(format!("{name}.jsonl")))?;

        let real: Vec<Vec<f32>> = (0..spec.shots.max(1))
            .map(|_| (0..dim).map(|d| if d == axis { 1.0 } else { 0.0 } + noise(&mut rng, 0.2)).collect())
            .collect();
        EmbeddingMatrix::from_rows(&real)?.save(dir.join("real").join(format!("{name}.emb")))?;
    }

    let mut rng = rng::stream(spec.seed, b"fixture/backgrounds");
    for i in 0..spec.backgrounds {
        let img = background_image(&mut rng, spec.background_size);
        save_rgb(&img, &dir.join("backgrounds").join(format!("bg_{i:03}.png")))?;
    }

    let summary = write_detection_fixture(dir, spec, &table)?;
    std::fs::write(dir.join("pipeline.toml"), default_config_toml(spec))
        .map_err(|e| Error::io(dir.join("pipeline.toml"), e))?;
    Ok(FixtureSummary {
        candidates: spec.candidates * spec.novel.len(),
        ..summary
    })
}

/// Ground truth, detections and crop embeddings. Each eval image carries one
/// box per novel class on the top row; every box gets a near-exact detection
/// (TP) and a detection of the same class on the empty bottom row (FP).
fn write_detection_fixture(dir: &Path, spec: &FixtureSpec, table: &CategoryTable) -> Result<FixtureSummary> {
    let mut rng = rng::stream(spec.seed, b"fixture/detections");
    let dim = spec.dim();
    let nb = spec.base.len();
    let n_novel = spec.novel.len();
    let side = 30.0;
    let step = 38.0;
    let width = (10.0 + step * n_novel as f64).ceil() as u32;
    let height = 150;

    let mut gt = CocoDataset {
        categories: table.to_coco(),
        ..Default::default()
    };
    let mut dets = Vec::new();
    let mut crops = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for img in 0..spec.eval_images {
        let image_id = img as u64 + 1;
        gt.images.push(CocoImage {
            id: image_id,
            file_name: format!("eval_{img:03}.png"),
            width,
            height,
        });
        for (c, name) in spec.novel.iter().enumerate() {
            let category_id = table.id_of(name)?;
            let x = 10.0 + step * c as f64;
            gt.annotations.push(CocoAnnotation {
                id: gt.annotations.len() as u64 + 1,
                image_id,
                category_id,
                bbox: [x, 10.0, side, side],
                area: side * side,
                iscrowd: 0,
            });

            let jitter = rng.random_range(-1.0..=1.0f64);
            dets.push(CocoResult {
                image_id,
                category_id,
                bbox: [x + jitter, 10.0, side, side],
                score: rng.random_range(0.3..1.0f64),
            });
            let mut v = vec![0.0f32; dim];
            v[nb + c] = 1.0;
            for x in v.iter_mut() {
                *x += noise(&mut rng, 0.02);
            }
            crops.push(v);
            tp += 1;

            dets.push(CocoResult {
                image_id,
                category_id,
                bbox: [x, 100.0, side, side],
                score: rng.random_range(0.3..1.0f64),
            });
            let wrong = (nb + c + 1 + rng.random_range(0..dim - 1)) % dim;
            let mut v = vec![0.0f32; dim];
            v[wrong] = 1.0;
            v[nb + c] = -1.0;
            for x in v.iter_mut() {
                *x += noise(&mut rng, 0.02);
            }
            crops.push(v);
            fp += 1;
        }
    }
    coco::write_json(dir.join("ground_truth.json"), &gt)?;
    coco::write_json(dir.join("detections.json"), &dets)?;
    EmbeddingMatrix::from_rows(&crops)?.save(dir.join("crops.emb"))?;
    Ok(FixtureSummary {
        candidates: 0,
        detections: dets.len(),
        true_positives: tp,
        false_positives: fp,
    })
}

fn quoted(names: &[String]) -> String {
    let q: Vec<String> = names.iter().map(|n| format!("{n:?}")).collect();
    format!("[{}]", q.join(", "))
}

pub fn default_config_toml(spec: &FixtureSpec) -> String {
    format!(
        "seed = {}\nasset_root = \".\"\n\n[profile]\nkind = \"voc\"\nbase = {}\nnovel = {}\nshots = {}\n",
        spec.seed,
        quoted(&spec.base),
        quoted(&spec.novel),
        spec.shots
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fixture_is_deterministic() {
        let spec = FixtureSpec {
            candidates: 4,
            backgrounds: 2,
            eval_images: 1,
            ..Default::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let s = generate(a.path(), &spec).unwrap();
        generate(b.path(), &spec).unwrap();
        assert_eq!(s.detections, 10);
        assert_eq!(s.true_positives, 5);
        for f in ["texts.emb", "crops.emb", "detections.json", "generated/cow.emb", "masks/bus_002.png"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
    }
}
