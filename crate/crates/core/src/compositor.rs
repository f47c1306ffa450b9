//! Copy-paste synthesis: saliency masks are binarized, the minimum enclosing
//! box of the foreground is cropped from the generated image, and the crop is
//! down-scaled and pasted at a random position on a base-dataset background.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{GrayImage, Rgb, RgbImage, Rgba, RgbaImage};
use log::{debug, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::{self, CategoryTable, CocoAnnotation, CocoDataset, CocoImage};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::rng::{self, StreamRng};
use crate::selector::SelectionRecord;

pub const DEFAULT_THRESHOLD: u8 = 128;
pub const DEFAULT_SCALE_MIN: f64 = 0.3;
pub const DEFAULT_SCALE_MAX: f64 = 1.0;
pub const DEFAULT_OVERLAP_MAX: f64 = 0.5;
pub const DEFAULT_PLACEMENT_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaliencyMask {
    width: u32,
    height: u32,
    values: Vec<u8>,
}

impl SaliencyMask {
    pub fn new(width: u32, height: u32, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(Error::ConfigInvalid(format!(
                "mask buffer of {} bytes does not match {width}x{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_gray(img: GrayImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_gray(img.into_luma8())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.values[(y * self.width + x) as usize]
    }

    pub fn check_matches(&self, img: &RgbImage) -> Result<()> {
        if img.dimensions() != (self.width, self.height) {
            return Err(Error::MaskSizeMismatch {
                mask_w: self.width,
                mask_h: self.height,
                image_w: img.width(),
                image_h: img.height(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    fg: Vec<bool>,
}

impl BinaryMask {
    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut fg = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                fg.push(f(x, y));
            }
        }
        Self { width, height, fg }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.fg[(y * self.width + x) as usize]
    }

    pub fn count(&self) -> usize {
        self.fg.iter().filter(|&&b| b).count()
    }
}

/// Foreground iff value >= threshold.
pub fn binarize_mask(mask: &SaliencyMask, threshold: u8) -> BinaryMask {
    BinaryMask::from_fn(mask.width, mask.height, |x, y| mask.get(x, y) >= threshold)
}

/// Tightest half-open box around the foreground.
pub fn min_enclosing_box(mask: &BinaryMask) -> Result<BBox> {
    let mut bounds: Option<(u32, u32, u32, u32)> = None;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                bounds = Some(match bounds {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    let (x0, y0, x1, y1) = bounds.ok_or(Error::EmptyMask)?;
    Ok(BBox::new(x0, y0, x1 + 1, y1 + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PasteMode {
    /// Opaque rectangle of the enclosing box.
    #[default]
    #[serde(rename = "box")]
    Box,
    /// Pixels gated by the binarized saliency map.
    #[serde(rename = "saliency")]
    SaliencyMap,
    /// Pixels gated by a segmentation map.
    #[serde(rename = "segmentation")]
    SegmentationMap,
}

impl std::str::FromStr for PasteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(PasteMode::Box),
            "saliency" => Ok(PasteMode::SaliencyMap),
            "segmentation" => Ok(PasteMode::SegmentationMap),
            other => Err(Error::ConfigInvalid(format!("unknown paste mode {other:?}"))),
        }
    }
}

/// RGBA patch; alpha is either 0 or 255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub pixels: RgbaImage,
}

impl Patch {
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn opaque_count(&self) -> usize {
        self.pixels.pixels().filter(|p| p[3] > 0).count()
    }

    /// Nearest-neighbor resample to `w x h`.
    pub fn resize_nearest(&self, w: u32, h: u32) -> Patch {
        let (sw, sh) = (self.width() as u64, self.height() as u64);
        let pixels = RgbaImage::from_fn(w, h, |x, y| {
            let sx = (((2 * x as u64 + 1) * sw) / (2 * w as u64)).min(sw - 1) as u32;
            let sy = (((2 * y as u64 + 1) * sh) / (2 * h as u64)).min(sh - 1) as u32;
            *self.pixels.get_pixel(sx, sy)
        });
        Patch { pixels }
    }

    /// Trims fully transparent border rows and columns; `None` if nothing is opaque.
    pub fn trim_transparent(&self) -> Option<(Patch, BBox)> {
        let alpha = BinaryMask::from_fn(self.width(), self.height(), |x, y| {
            self.pixels.get_pixel(x, y)[3] > 0
        });
        let b = min_enclosing_box(&alpha).ok()?;
        let pixels = image::imageops::crop_imm(&self.pixels, b.x_min, b.y_min, b.width(), b.height()).to_image();
        Some((Patch { pixels }, b))
    }
}

/// Cuts `bbox` out of `image`. Mask modes take per-pixel alpha from `mask`.
pub fn crop(image: &RgbImage, bbox: BBox, mode: PasteMode, mask: Option<&BinaryMask>) -> Result<Patch> {
    bbox.check_within(image.width(), image.height())?;
    let gate = match mode {
        PasteMode::Box => None,
        PasteMode::SaliencyMap | PasteMode::SegmentationMap => {
            let m = mask.ok_or_else(|| Error::ConfigInvalid(format!("{mode:?} crop needs a mask")))?;
            if (m.width(), m.height()) != image.dimensions() {
                return Err(Error::MaskSizeMismatch {
                    mask_w: m.width(),
                    mask_h: m.height(),
                    image_w: image.width(),
                    image_h: image.height(),
                });
            }
            Some(m)
        }
    };
    let pixels = RgbaImage::from_fn(bbox.width(), bbox.height(), |x, y| {
        let (ix, iy) = (bbox.x_min + x, bbox.y_min + y);
        let Rgb([r, g, b]) = *image.get_pixel(ix, iy);
        let a = match gate {
            Some(m) if !m.get(ix, iy) => 0,
            _ => 255,
        };
        Rgba([r, g, b, a])
    });
    Ok(Patch { pixels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasteConfig {
    #[serde(default = "default_scale_min")]
    pub scale_min: f64,
    #[serde(default = "default_scale_max")]
    pub scale_max: f64,
    #[serde(default = "default_overlap_max")]
    pub overlap_max: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_scale_min() -> f64 {
    DEFAULT_SCALE_MIN
}
fn default_scale_max() -> f64 {
    DEFAULT_SCALE_MAX
}
fn default_overlap_max() -> f64 {
    DEFAULT_OVERLAP_MAX
}
fn default_attempts() -> usize {
    DEFAULT_PLACEMENT_ATTEMPTS
}

impl Default for PasteConfig {
    fn default() -> Self {
        Self {
            scale_min: DEFAULT_SCALE_MIN,
            scale_max: DEFAULT_SCALE_MAX,
            overlap_max: DEFAULT_OVERLAP_MAX,
            max_attempts: DEFAULT_PLACEMENT_ATTEMPTS,
        }
    }
}

impl PasteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "scale range [{}, {}] must satisfy 0 < min <= max",
                self.scale_min, self.scale_max
            )));
        }
        if !(0.0..=1.0).contains(&self.overlap_max) {
            return Err(Error::ConfigInvalid(format!(
                "overlap_max {} outside [0, 1]",
                self.overlap_max
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::ConfigInvalid("max_attempts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: String,
    pub bbox: BBox,
    pub category: String,
}

#[derive(Debug, Clone)]
pub struct Pasted {
    pub image: RgbImage,
    pub annotation: Annotation,
    pub scale: f64,
    pub attempts: usize,
    /// Largest IoU between the pasted box and an existing annotation.
    pub max_iou: f64,
}

fn scaled_len(len: u32, scale: f64) -> u32 {
    ((len as f64 * scale).round() as u32).max(1)
}

/// Down-scales `patch` by a random factor and pastes it onto a copy of
/// `background`, avoiding heavy overlap with `existing` boxes.
#[allow(clippy::too_many_arguments)]
pub fn paste(
    background: &RgbImage,
    existing: &[BBox],
    patch: &Patch,
    category: &str,
    image_id: &str,
    cfg: &PasteConfig,
    rng: &mut StreamRng,
) -> Result<Pasted> {
    cfg.validate()?;
    let (bw, bh) = background.dimensions();
    let (pw, ph) = (patch.width(), patch.height());
    if scaled_len(pw, cfg.scale_min) > bw || scaled_len(ph, cfg.scale_min) > bh {
        return Err(Error::PatchTooLarge {
            patch_w: pw,
            patch_h: ph,
            bg_w: bw,
            bg_h: bh,
            scale: cfg.scale_min,
        });
    }
    let fit = (bw as f64 / pw as f64).min(bh as f64 / ph as f64);
    let hi = cfg.scale_max.min(fit).max(cfg.scale_min);
    let scale = if hi > cfg.scale_min {
        rng.random_range(cfg.scale_min..=hi)
    } else {
        cfg.scale_min
    };
    let (sw, sh) = (scaled_len(pw, scale).min(bw), scaled_len(ph, scale).min(bh));
    // resampling can drop masked border pixels; keep the pasted box tight
    let scaled = patch
        .resize_nearest(sw, sh)
        .trim_transparent()
        .ok_or(Error::EmptyMask)?
        .0;
    let (sw, sh) = (scaled.width(), scaled.height());

    let mut best: Option<(BBox, f64)> = None;
    let mut attempts = 0;
    while attempts < cfg.max_attempts {
        attempts += 1;
        let x = rng.random_range(0..=bw - sw);
        let y = rng.random_range(0..=bh - sh);
        let candidate = BBox::new(x, y, x + sw, y + sh);
        let overlap = existing.iter().map(|e| candidate.iou(e)).fold(0.0, f64::max);
        if best.is_none_or(|(_, o)| overlap < o) {
            best = Some((candidate, overlap));
        }
        if overlap <= cfg.overlap_max {
            break;
        }
    }
    let (placed, max_iou) = best.expect("at least one attempt");

    let mut image = background.clone();
    for (x, y, p) in scaled.pixels.enumerate_pixels() {
        if p[3] > 0 {
            image.put_pixel(placed.x_min + x, placed.y_min + y, Rgb([p[0], p[1], p[2]]));
        }
    }
    Ok(Pasted {
        image,
        annotation: Annotation {
            image_id: image_id.to_string(),
            bbox: placed,
            category: category.to_string(),
        },
        scale,
        attempts,
        max_iou,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeConfig {
    #[serde(default)]
    pub mode: PasteMode,
    #[serde(default = "default_threshold")]
    pub threshold: u8,
    #[serde(default = "default_scale_min")]
    pub scale_min: f64,
    #[serde(default = "default_scale_max")]
    pub scale_max: f64,
    #[serde(default = "default_overlap_max")]
    pub overlap_max: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_threshold() -> u8 {
    DEFAULT_THRESHOLD
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self {
            mode: PasteMode::Box,
            threshold: DEFAULT_THRESHOLD,
            scale_min: DEFAULT_SCALE_MIN,
            scale_max: DEFAULT_SCALE_MAX,
            overlap_max: DEFAULT_OVERLAP_MAX,
            max_attempts: DEFAULT_PLACEMENT_ATTEMPTS,
        }
    }
}

impl ComposeConfig {
    pub fn paste(&self) -> PasteConfig {
        PasteConfig {
            scale_min: self.scale_min,
            scale_max: self.scale_max,
            overlap_max: self.overlap_max,
            max_attempts: self.max_attempts,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Background {
    pub id: String,
    pub image: RgbImage,
    /// Ground-truth boxes already present on the background.
    pub boxes: Vec<BBox>,
}

/// Loads `*.png` from `dir`, sorted by file name. An optional COCO file
/// supplies existing boxes, matched by `file_name`.
pub fn load_backgrounds(dir: &Path, annotations: Option<&Path>) -> Result<Vec<Background>> {
    let mut boxes: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
    if let Some(path) = annotations {
        let ds: CocoDataset = coco::read_json(path)?;
        let names: BTreeMap<u64, &str> = ds.images.iter().map(|i| (i.id, i.file_name.as_str())).collect();
        for a in &ds.annotations {
            let Some(name) = names.get(&a.image_id) else { continue };
            let [x, y, w, h] = a.bbox;
            let (x0, y0) = (x.floor().max(0.0) as u32, y.floor().max(0.0) as u32);
            let (x1, y1) = ((x + w).ceil() as u32, (y + h).ceil() as u32);
            if let Ok(b) = BBox::try_new(x0, y0, x1, y1) {
                boxes.entry(name.to_string()).or_default().push(b);
            }
        }
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let image = load_rgb(&p)?;
            Ok(Background {
                boxes: boxes.remove(&name).unwrap_or_default(),
                id: name,
                image,
            })
        })
        .collect()
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    if !path.exists() {
        return Err(Error::MissingAsset(path.to_path_buf()));
    }
    image::open(path)
        .map(|i| i.into_rgb8())
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Source of generated images and their masks, keyed by manifest `image_id`.
pub trait CandidateSource: Sync {
    fn image(&self, image_id: &str) -> Result<RgbImage>;
    fn mask(&self, image_id: &str) -> Result<SaliencyMask>;
}

/// `<images>/<image_id>.png` and `<masks>/<image_id>.png`.
#[derive(Debug, Clone)]
pub struct DirCandidates {
    pub images: PathBuf,
    pub masks: PathBuf,
}

impl CandidateSource for DirCandidates {
    fn image(&self, image_id: &str) -> Result<RgbImage> {
        load_rgb(&self.images.join(format!("{image_id}.png")))
    }

    fn mask(&self, image_id: &str) -> Result<SaliencyMask> {
        let p = self.masks.join(format!("{image_id}.png"));
        if !p.exists() {
            return Err(Error::MissingAsset(p));
        }
        SaliencyMask::load(&p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub ordinal: usize,
    pub category: String,
    pub image_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub ordinal: usize,
    pub file_name: String,
    pub source_image_id: String,
    pub category: String,
    pub background: String,
    pub scale: f64,
    pub attempts: usize,
    pub max_iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub placements: Vec<Placement>,
    pub skipped: Vec<SkippedCandidate>,
    /// Background ids in the order they were available for sampling.
    pub backgrounds: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    /// `(file_name, image)` in output order.
    pub images: Vec<(String, RgbImage)>,
    pub annotations: CocoDataset,
    pub report: RunReport,
}

impl SynthDataset {
    /// Writes images, `annotations.json` and `report.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let img_dir = dir.join("images");
        std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        self.images.par_iter().try_for_each(|(name, img)| {
            let p = img_dir.join(name);
            img.save(&p).map_err(|source| Error::Image { path: p, source })
        })?;
        coco::write_json(dir.join("annotations.json"), &self.annotations)?;
        coco::write_json(dir.join("report.json"), &self.report)
    }
}

enum Outcome {
    Placed(Box<Pasted>, Placement),
    Skipped(SkippedCandidate),
}

fn compose_one(
    ordinal: usize,
    category: &str,
    image_id: &str,
    source: &dyn CandidateSource,
    backgrounds: &[Background],
    cfg: &ComposeConfig,
    seed: u64,
) -> Result<Outcome> {
    let mut rng = rng::instance_stream(seed, ordinal);
    let bg = &backgrounds[rng.random_range(0..backgrounds.len())];
    let image = source.image(image_id)?;
    let mask = source.mask(image_id)?;
    mask.check_matches(&image)?;
    let binary = binarize_mask(&mask, cfg.threshold);
    let skip = |reason: String| {
        Ok(Outcome::Skipped(SkippedCandidate {
            ordinal,
            category: category.to_string(),
            image_id: image_id.to_string(),
            reason,
        }))
    };
    let bbox = match min_enclosing_box(&binary) {
        Ok(b) => b,
        Err(Error::EmptyMask) => {
            warn!("skipping {image_id}: saliency mask is empty");
            return skip("empty mask".into());
        }
        Err(e) => return Err(e),
    };
    let patch = crop(&image, bbox, cfg.mode, Some(&binary))?;
    let file_name = format!("synth_{ordinal:05}.png");
    let pasted = match paste(&bg.image, &bg.boxes, &patch, category, &file_name, &cfg.paste(), &mut rng) {
        Ok(p) => p,
        Err(e @ (Error::PatchTooLarge { .. } | Error::EmptyMask)) => {
            warn!("skipping {image_id}: {e}");
            return skip(e.to_string());
        }
        Err(e) => return Err(e),
    };
    debug!(
        "{image_id} -> {file_name} on {} at scale {:.3} after {} attempt(s)",
        bg.id, pasted.scale, pasted.attempts
    );
    let placement = Placement {
        ordinal,
        file_name,
        source_image_id: image_id.to_string(),
        category: category.to_string(),
        background: bg.id.clone(),
        scale: pasted.scale,
        attempts: pasted.attempts,
        max_iou: pasted.max_iou,
    };
    Ok(Outcome::Placed(Box::new(pasted), placement))
}

/// One composite per selected instance. Instance `i` (counting across all
/// selections in order) draws from its own RNG stream, so the output is the
/// same for any worker count.
pub fn synthesize_dataset(
    selections: &[SelectionRecord],
    source: &dyn CandidateSource,
    backgrounds: &[Background],
    categories: &CategoryTable,
    cfg: &ComposeConfig,
    seed: u64,
    jobs: usize,
) -> Result<SynthDataset> {
    cfg.paste().validate()?;
    let work: Vec<(usize, &str, &str)> = selections
        .iter()
        .flat_map(|s| s.image_ids.iter().map(move |id| (s.category.as_str(), id.as_str())))
        .enumerate()
        .map(|(i, (c, id))| (i, c, id))
        .collect();
    for (_, c, _) in &work {
        categories.id_of(c)?;
    }
    if !work.is_empty() && backgrounds.is_empty() {
        return Err(Error::EmptyBackgroundPool);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        work.par_iter()
            .map(|&(i, c, id)| compose_one(i, c, id, source, backgrounds, cfg, seed))
            .collect::<Result<_>>()
    })?;

    let mut ds = CocoDataset {
        categories: categories.to_coco(),
        ..Default::default()
    };
    let mut report = RunReport {
        backgrounds: backgrounds.iter().map(|b| b.id.clone()).collect(),
        ..Default::default()
    };
    let mut images = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Skipped(s) => report.skipped.push(s),
            Outcome::Placed(pasted, placement) => {
                let id = images.len() as u64 + 1;
                let b = pasted.annotation.bbox;
                ds.images.push(CocoImage {
                    id,
                    file_name: placement.file_name.clone(),
                    width: pasted.image.width(),
                    height: pasted.image.height(),
                });
                ds.annotations.push(CocoAnnotation {
                    id,
                    image_id: id,
                    category_id: categories.id_of(&pasted.annotation.category)?,
                    bbox: b.to_xywh(),
                    area: b.area() as f64,
                    iscrowd: 0,
                });
                images.push((placement.file_name.clone(), pasted.image));
                report.placements.push(placement);
            }
        }
    }
    Ok(SynthDataset {
        images,
        annotations: ds,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn mask_from(width: u32, height: u32, fg: &[(u32, u32)]) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| fg.contains(&(x, y)))
    }

    #[test]
    fn binarize_is_inclusive() {
        let m = SaliencyMask::new(3, 1, vec![100, 128, 200]).unwrap();
        let b = binarize_mask(&m, 128);
        assert_eq!((b.get(0, 0), b.get(1, 0), b.get(2, 0)), (false, true, true));
        assert_eq!(binarize_mask(&SaliencyMask::new(2, 2, vec![0; 4]).unwrap(), 128).count(), 0);
        assert_eq!(binarize_mask(&SaliencyMask::new(2, 2, vec![255; 4]).unwrap(), 128).count(), 4);
    }

    #[test]
    fn enclosing_box_examples() {
        assert_eq!(min_enclosing_box(&mask_from(20, 20, &[(5, 7)])).unwrap(), BBox::new(5, 7, 6, 8));
        assert_eq!(
            min_enclosing_box(&mask_from(20, 20, &[(3, 4), (10, 8)])).unwrap(),
            BBox::new(3, 4, 11, 9)
        );
        assert!(matches!(min_enclosing_box(&mask_from(4, 4, &[])), Err(Error::EmptyMask)));
    }

    fn checker(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| Rgb([(x * 10 % 256) as u8, (y * 10 % 256) as u8, 200]))
    }

    #[test]
    fn crop_modes() {
        let img = checker(8, 8);
        let full = crop(&img, BBox::new(0, 0, 8, 8), PasteMode::Box, None).unwrap();
        for (x, y, p) in full.pixels.enumerate_pixels() {
            let q = img.get_pixel(x, y);
            assert_eq!(p.0, [q[0], q[1], q[2], 255]);
        }
        let region = crop(&img, BBox::new(2, 2, 6, 6), PasteMode::Box, None).unwrap();
        assert_eq!(region.opaque_count(), 16);

        // left half of the 4x4 region is foreground
        let mask = BinaryMask::from_fn(8, 8, |x, _| x < 4);
        let half = crop(&img, BBox::new(2, 2, 6, 6), PasteMode::SaliencyMap, Some(&mask)).unwrap();
        assert_eq!(half.opaque_count(), 8);
        for (x, _, p) in half.pixels.enumerate_pixels() {
            assert_eq!(p[3] == 255, x < 2);
        }
        assert!(matches!(
            crop(&img, BBox::new(2, 2, 9, 6), PasteMode::Box, None),
            Err(Error::BoxOutOfBounds { .. })
        ));
    }

    #[test]
    fn paste_bbox_bounds_changed_pixels() {
        let bg = RgbImage::from_pixel(40, 30, Rgb([0, 0, 0]));
        let patch = crop(&RgbImage::from_pixel(12, 10, Rgb([255, 1, 1])), BBox::new(0, 0, 12, 10), PasteMode::Box, None).unwrap();
        let mut rng = StreamRng::seed_from_u64(9);
        let p = paste(&bg, &[], &patch, "bird", "x", &PasteConfig::default(), &mut rng).unwrap();
        let mut changed: Option<BBox> = None;
        for (x, y, px) in p.image.enumerate_pixels() {
            if px != bg.get_pixel(x, y) {
                let b = BBox::new(x, y, x + 1, y + 1);
                changed = Some(changed.map_or(b, |c| c.union(&b)));
            }
        }
        assert_eq!(changed.unwrap(), p.annotation.bbox);
    }

    #[test]
    fn exact_fit_is_forced_to_origin() {
        let bg = RgbImage::from_pixel(6, 4, Rgb([0, 0, 0]));
        let cfg = PasteConfig {
            scale_min: 1.0,
            scale_max: 1.0,
            ..Default::default()
        };
        let same = crop(&checker(6, 4), BBox::new(0, 0, 6, 4), PasteMode::Box, None).unwrap();
        let p = paste(&bg, &[], &same, "c", "x", &cfg, &mut StreamRng::seed_from_u64(1)).unwrap();
        assert_eq!(p.annotation.bbox, BBox::new(0, 0, 6, 4));

        let big = crop(&checker(7, 4), BBox::new(0, 0, 7, 4), PasteMode::Box, None).unwrap();
        assert!(matches!(
            paste(&bg, &[], &big, "c", "x", &cfg, &mut StreamRng::seed_from_u64(1)),
            Err(Error::PatchTooLarge { .. })
        ));
    }

    #[test]
    fn overlap_retries_avoid_existing_boxes() {
        let bg = RgbImage::from_pixel(100, 100, Rgb([0, 0, 0]));
        let patch = crop(&checker(10, 10), BBox::new(0, 0, 10, 10), PasteMode::Box, None).unwrap();
        let existing = [BBox::new(0, 0, 60, 60)];
        let cfg = PasteConfig {
            scale_min: 1.0,
            scale_max: 1.0,
            overlap_max: 0.0,
            ..Default::default()
        };
        for seed in 0..20 {
            let p = paste(&bg, &existing, &patch, "c", "x", &cfg, &mut StreamRng::seed_from_u64(seed)).unwrap();
            assert_eq!(p.max_iou, 0.0, "seed {seed}");
        }
    }

    #[test]
    fn paste_is_deterministic() {
        let bg = checker(50, 50);
        let patch = crop(&RgbImage::from_pixel(9, 9, Rgb([1, 2, 3])), BBox::new(0, 0, 9, 9), PasteMode::Box, None).unwrap();
        let run = || {
            let mut rng = StreamRng::seed_from_u64(42);
            let a = paste(&bg, &[], &patch, "c", "x", &PasteConfig::default(), &mut rng).unwrap();
            let b = paste(&a.image, &[a.annotation.bbox], &patch, "c", "x", &PasteConfig::default(), &mut rng).unwrap();
            b.image.into_raw()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_selection_gives_empty_dataset() {
        let table = CategoryTable::new(["bird"]).unwrap();
        let src = DirCandidates {
            images: PathBuf::from("/nonexistent"),
            masks: PathBuf::from("/nonexistent"),
        };
        let ds = synthesize_dataset(&[], &src, &[], &table, &ComposeConfig::default(), 0, 1).unwrap();
        assert!(ds.images.is_empty());
        assert!(ds.annotations.annotations.is_empty());
        assert_eq!(ds.annotations.categories.len(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn enclosing_box_grows_under_union(
                a in proptest::collection::vec((0u32..16, 0u32..16), 1..10),
                b in proptest::collection::vec((0u32..16, 0u32..16), 0..10),
            ) {
                let small = mask_from(16, 16, &a);
                let both: Vec<_> = a.iter().chain(&b).copied().collect();
                let big = mask_from(16, 16, &both);
                let bs = min_enclosing_box(&small).unwrap();
                let bb = min_enclosing_box(&big).unwrap();
                prop_assert_eq!(bs.union(&bb), bb);
            }
        }
    }
}
