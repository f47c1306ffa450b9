//! End-to-end run: prompts -> select -> compose -> filter -> eval.
//!
//! Inputs live under an asset root with a fixed layout:
//!
//! ```text
//! generated/<category>.emb     candidate image embeddings (EMB1)
//! generated/<category>.jsonl   their manifest
//! real/<category>.emb          few-shot instance embeddings (instance strategies)
//! texts.emb, texts.jsonl       text embeddings; manifest image_id holds the text
//! images/<image_id>.png        generated images
//! masks/<image_id>.png         8-bit saliency or segmentation maps
//! backgrounds/*.png            base-dataset backgrounds
//! backgrounds.json             optional COCO boxes already on the backgrounds
//! detections.json              detector output, COCO results
//! crops.emb                    one crop embedding per detection, same order
//! ground_truth.json            COCO ground truth for evaluation
//! ```
//!
//! Every artifact is written under `<out>/run-<hash>/`, where the hash covers
//! the whole configuration. A stage that is switched off is skipped; later
//! stages then read its artifact from the run directory if an earlier run
//! produced it, or from the asset root.

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coco::{self, CategoryTable, CocoDataset, CocoResult};
use crate::compositor::{self, ComposeConfig, DirCandidates, SynthDataset};
use crate::embedding::{EmbeddingMatrix, Manifest};
use crate::error::{Error, Result};
use crate::eval;
use crate::filter::{self, Detection, FilterConfig, ListMode, RemovedRecord, TextBank};
use crate::prompts::{self, PromptScheme};
use crate::selector::{self, SelectionConfig, SelectionInputs, SelectionRecord, SelectionResult, Strategy};

pub const ASSET_ROOT_ENV: &str = "SYNTHFSOD_ASSETS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// Small label space: filter against base and novel names.
    #[default]
    Voc,
    /// Large label space: filter against novel names only.
    Coco,
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "voc" => Ok(ProfileKind::Voc),
            "coco" => Ok(ProfileKind::Coco),
            other => Err(Error::ConfigInvalid(format!("unknown profile kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    #[serde(default)]
    pub kind: ProfileKind,
    pub base: Vec<String>,
    pub novel: Vec<String>,
    /// Real annotated instances per novel class (K).
    #[serde(default = "default_shots")]
    pub shots: usize,
}

fn default_shots() -> usize {
    1
}

impl Profile {
    pub fn category_table(&self) -> Result<CategoryTable> {
        CategoryTable::new(self.base.iter().chain(&self.novel).cloned())
    }

    pub fn default_list_mode(&self) -> ListMode {
        match self.kind {
            ProfileKind::Voc => ListMode::BaseAndNovel,
            ProfileKind::Coco => ListMode::NovelOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClipText {
    /// Text row whose text is the bare category name.
    #[default]
    Name,
    /// Text row whose text is the first generation prompt of the scheme.
    Prompt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectStage {
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_g")]
    pub g: usize,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub clip_text: ClipText,
}

fn default_strategy() -> Strategy {
    Strategy::SpectralCluster
}
fn default_g() -> usize {
    selector::DEFAULT_G
}
fn default_max_iters() -> usize {
    selector::DEFAULT_MAX_ITERS
}

impl Default for SelectStage {
    fn default() -> Self {
        Self {
            strategy: default_strategy(),
            g: default_g(),
            k: None,
            sigma: None,
            max_iters: default_max_iters(),
            clip_text: ClipText::Name,
        }
    }
}

impl SelectStage {
    pub fn to_config(&self, seed: u64) -> SelectionConfig {
        SelectionConfig {
            strategy: self.strategy,
            g: self.g,
            k: self.k,
            sigma: self.sigma,
            seed,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterStage {
    #[serde(default = "default_clip_thresh")]
    pub clip_thresh: f64,
    /// Defaults from the profile kind.
    #[serde(default)]
    pub list_mode: Option<ListMode>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_clip_thresh() -> f64 {
    filter::DEFAULT_CLIP_THRESHOLD
}
fn default_temperature() -> f64 {
    1.0
}

impl Default for FilterStage {
    fn default() -> Self {
        Self {
            clip_thresh: default_clip_thresh(),
            list_mode: None,
            temperature: default_temperature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvalStage {
    /// Detections below this confidence are ignored by the FP ratio.
    #[serde(default)]
    pub min_confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stages {
    #[serde(default = "yes")]
    pub prompts: bool,
    #[serde(default = "yes")]
    pub select: bool,
    #[serde(default = "yes")]
    pub compose: bool,
    #[serde(default = "yes")]
    pub filter: bool,
    #[serde(default = "yes")]
    pub eval: bool,
}

fn yes() -> bool {
    true
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            prompts: true,
            select: true,
            compose: true,
            filter: true,
            eval: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    /// Asset root; relative paths resolve against the config file.
    #[serde(default, skip_serializing)]
    pub asset_root: Option<PathBuf>,
    pub profile: Profile,
    #[serde(default = "default_scheme")]
    pub prompt_scheme: PromptScheme,
    #[serde(default)]
    pub selection: SelectStage,
    #[serde(default)]
    pub compose: ComposeConfig,
    #[serde(default)]
    pub filter: FilterStage,
    #[serde(default)]
    pub eval: EvalStage,
    #[serde(default)]
    pub stages: Stages,
}

fn default_scheme() -> PromptScheme {
    PromptScheme::None
}

impl PipelineConfig {
    /// Defaults: spectral clustering, G = 20, CLIP threshold 0.1.
    pub fn new(profile: Profile) -> Self {
        Self {
            seed: 0,
            asset_root: None,
            profile,
            prompt_scheme: default_scheme(),
            selection: SelectStage::default(),
            compose: ComposeConfig::default(),
            filter: FilterStage::default(),
            eval: EvalStage::default(),
            stages: Stages::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// Parses a TOML file; a relative `asset_root` becomes relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(root), Some(dir)) = (&cfg.asset_root, path.parent()) {
            if root.is_relative() {
                cfg.asset_root = Some(dir.join(root));
            }
        }
        Ok(cfg)
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            clip_thresh: self.filter.clip_thresh,
            list_mode: self.filter.list_mode.unwrap_or(self.profile.default_list_mode()),
            temperature: self.filter.temperature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.profile;
        if p.novel.is_empty() {
            return Err(Error::ConfigInvalid("profile has no novel categories".into()));
        }
        if let Some(c) = p.base.iter().find(|b| p.novel.contains(b)) {
            return Err(Error::ConfigInvalid(format!(
                "category {c:?} is both base and novel"
            )));
        }
        p.category_table()?;
        if self.selection.g > 0 {
            self.selection.to_config(self.seed).validate()?;
        }
        self.compose.paste().validate()?;
        self.filter_config().validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form (asset root excluded).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir_name(&self) -> String {
        format!("run-{}", &self.hash()[..12])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Artifacts {
    pub run_dir: PathBuf,
    pub prompts: Option<PathBuf>,
    pub selection: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub filtered: Option<PathBuf>,
    pub removed: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

pub struct RunOptions {
    pub asset_root: PathBuf,
    pub out_root: PathBuf,
    /// Worker cap; 0 uses every available core.
    pub jobs: usize,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingAsset(path))
    }
}

/// Artifact of an earlier stage: the run directory first, then the asset root.
fn prior(run_dir: &Path, assets: &Path, name: &str) -> Result<PathBuf> {
    let in_run = run_dir.join(name);
    if in_run.exists() {
        return Ok(in_run);
    }
    existing(assets.join(name))
}

pub fn run_pipeline(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Artifacts> {
    cfg.validate()?;
    let run_dir = opts.out_root.join(cfg.run_dir_name());
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let assets = opts.asset_root.as_path();
    let jobs = resolve_jobs(opts.jobs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))?;
    let mut out = Artifacts {
        run_dir: run_dir.clone(),
        ..Default::default()
    };
    info!("run directory {}", run_dir.display());

    if cfg.stages.prompts {
        let path = run_dir.join("prompts.json");
        stage("prompts", write_prompts(cfg, &path))?;
        out.prompts = Some(path);
    }

    if cfg.stages.select {
        let path = run_dir.join("selection.json");
        let (records, diagnostics) = stage("select", pool.install(|| run_selection(cfg, assets)))?;
        stage("select", coco::write_json(&path, &records))?;
        stage("select", coco::write_json(run_dir.join("selection_diagnostics.json"), &diagnostics))?;
        out.selection = Some(path);
    }

    if cfg.stages.compose {
        let dir = run_dir.join("dataset");
        stage(
            "compose",
            prior(&run_dir, assets, "selection.json")
                .and_then(|sel| run_compose(cfg, &sel, assets, jobs))
                .and_then(|ds| ds.write(&dir)),
        )?;
        out.dataset = Some(dir);
    }

    if cfg.stages.filter {
        let (kept, removed) = (run_dir.join("filtered.json"), run_dir.join("removed.json"));
        stage("filter", {
            let inputs = FilterInputs::under(assets);
            pool.install(|| run_filter(cfg, &inputs))
                .and_then(|(k, r)| coco::write_json(&kept, &k).and(coco::write_json(&removed, &r)))
        })?;
        out.filtered = Some(kept);
        out.removed = Some(removed);
    }

    if cfg.stages.eval {
        let path = run_dir.join("metrics.json");
        stage("eval", {
            let after = match prior(&run_dir, assets, "filtered.json") {
                Ok(p) => Some(p),
                Err(Error::MissingAsset(_)) => None,
                Err(e) => return Err(Error::Stage { stage: "eval", source: Box::new(e) }),
            };
            existing(assets.join("ground_truth.json"))
                .and_then(|gt| Ok((gt, existing(assets.join("detections.json"))?)))
                .and_then(|(gt, before)| run_eval(cfg, &gt, &before, after.as_deref()))
                .and_then(|report| coco::write_json(&path, &report))
        })?;
        out.metrics = Some(path);
    }
    Ok(out)
}

/// 0 means every available core.
pub fn resolve_jobs(jobs: usize) -> usize {
    if jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        jobs
    }
}

pub fn write_prompts(cfg: &PipelineConfig, path: &Path) -> Result<()> {
    let records = prompts::prompt_records(&cfg.profile.novel, cfg.prompt_scheme)?;
    coco::write_json(path, &records)
}

pub struct TextRows {
    pub embeddings: EmbeddingMatrix,
    pub manifest: Manifest,
}

impl TextRows {
    pub fn load(emb: &Path, manifest: &Path) -> Result<Self> {
        let embeddings = EmbeddingMatrix::load(existing(emb.to_path_buf())?)?;
        let manifest = Manifest::load(existing(manifest.to_path_buf())?)?;
        manifest.check_matches(&embeddings)?;
        Ok(Self {
            embeddings,
            manifest,
        })
    }
}

/// CLIP score of each candidate: cosine with the category's text embedding.
fn clip_scores_for(cfg: &PipelineConfig, category: &str, generated: &EmbeddingMatrix, texts: &TextRows) -> Result<Vec<f64>> {
    let wanted = match cfg.selection.clip_text {
        ClipText::Name => category.to_string(),
        ClipText::Prompt => prompts::generate_prompts(category, cfg.prompt_scheme)?.remove(0),
    };
    let row = texts
        .manifest
        .entries()
        .iter()
        .find(|e| e.category == category && e.image_id == wanted)
        .ok_or_else(|| Error::UnknownCategory(format!("{category} (text {wanted:?})")))?;
    selector::similarity_to(generated, texts.embeddings.row(row.row_index))
}

fn select_category(
    cfg: &PipelineConfig,
    assets: &Path,
    category: &str,
    texts: Option<&TextRows>,
) -> Result<(SelectionRecord, SelectionResult)> {
    let gen_dir = assets.join("generated");
    let generated = EmbeddingMatrix::load(existing(gen_dir.join(format!("{category}.emb")))?)?;
    let manifest = Manifest::load(existing(gen_dir.join(format!("{category}.jsonl")))?)?;
    manifest.check_matches(&generated)?;
    let generated = generated.l2_normalize()?;
    let sel_cfg = cfg.selection.to_config(cfg.seed);

    let result = if cfg.selection.g == 0 {
        SelectionResult {
            category: category.to_string(),
            strategy: sel_cfg.strategy,
            indices: Vec::new(),
            diagnostics: selector::Diagnostics::None,
        }
    } else {
        let real = if sel_cfg.strategy.needs_real() {
            let path = existing(assets.join("real").join(format!("{category}.emb")))?;
            Some(EmbeddingMatrix::load(path)?.l2_normalize()?)
        } else {
            None
        };
        let scores = match (sel_cfg.strategy.needs_clip_scores(), texts) {
            (true, Some(t)) => Some(clip_scores_for(cfg, category, &generated, t)?),
            (true, None) => return Err(Error::MissingAsset(assets.join("texts.emb"))),
            (false, _) => None,
        };
        selector::select(
            SelectionInputs {
                category,
                generated: &generated,
                real: real.as_ref(),
                clip_scores: scores.as_deref(),
            },
            &sel_cfg,
        )?
    };
    Ok((result.to_record(&manifest)?, result))
}

/// Selects G candidates for every novel category, reading
/// `generated/<category>.{emb,jsonl}` (and `real/`, `texts.*` when the
/// strategy needs them) under `assets`.
pub fn run_selection(cfg: &PipelineConfig, assets: &Path) -> Result<(Vec<SelectionRecord>, Vec<SelectionResult>)> {
    let texts = if cfg.selection.g > 0 && cfg.selection.strategy.needs_clip_scores() {
        Some(TextRows::load(&assets.join("texts.emb"), &assets.join("texts.jsonl"))?)
    } else {
        None
    };
    let per_category: Vec<(SelectionRecord, SelectionResult)> = cfg
        .profile
        .novel
        .par_iter()
        .map(|c| select_category(cfg, assets, c, texts.as_ref()))
        .collect::<Result<_>>()?;
    Ok(per_category.into_iter().unzip())
}

/// Composes the selected candidates from `images/`, `masks/` and
/// `backgrounds/` under `assets`.
pub fn run_compose(cfg: &PipelineConfig, selection: &Path, assets: &Path, jobs: usize) -> Result<SynthDataset> {
    let selections: Vec<SelectionRecord> = coco::read_json(selection)?;
    let source = DirCandidates {
        images: assets.join("images"),
        masks: assets.join("masks"),
    };
    let bg_dir = assets.join("backgrounds");
    let backgrounds = if bg_dir.is_dir() {
        let ann = assets.join("backgrounds.json");
        compositor::load_backgrounds(&bg_dir, ann.exists().then_some(ann.as_path()))?
    } else {
        Vec::new()
    };
    let table = cfg.profile.category_table()?;
    let ds = compositor::synthesize_dataset(&selections, &source, &backgrounds, &table, &cfg.compose, cfg.seed, resolve_jobs(jobs))?;
    info!(
        "composed {} images ({} candidates skipped)",
        ds.images.len(),
        ds.report.skipped.len()
    );
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterInputs {
    pub detections: PathBuf,
    pub crops: PathBuf,
    pub texts: PathBuf,
    pub texts_manifest: PathBuf,
}

impl FilterInputs {
    pub fn under(assets: &Path) -> Self {
        Self {
            detections: assets.join("detections.json"),
            crops: assets.join("crops.emb"),
            texts: assets.join("texts.emb"),
            texts_manifest: assets.join("texts.jsonl"),
        }
    }
}

/// Returns the kept detections (COCO results) and the removal report.
pub fn run_filter(cfg: &PipelineConfig, inputs: &FilterInputs) -> Result<(Vec<CocoResult>, Vec<RemovedRecord>)> {
    let table = cfg.profile.category_table()?;
    let results: Vec<CocoResult> = coco::read_json(existing(inputs.detections.clone())?)?;
    let dets = filter::detections_from_coco(&results, &table)?;
    let crops = EmbeddingMatrix::load(existing(inputs.crops.clone())?)?.l2_normalize()?;
    let texts = TextRows::load(&inputs.texts, &inputs.texts_manifest)?;
    let fcfg = cfg.filter_config();
    let bank = TextBank::from_manifest(
        &cfg.profile.base,
        &cfg.profile.novel,
        fcfg.list_mode,
        &texts.embeddings,
        &texts.manifest,
    )?;
    let outcome = filter::filter_detections(&dets, &crops, &bank, &fcfg)?;
    info!(
        "filter kept {} and removed {} detections",
        outcome.kept.len(),
        outcome.removed.len()
    );
    Ok((
        filter::detections_to_coco(&outcome.kept, &table)?,
        filter::removed_records(&outcome.removed, &table)?,
    ))
}

/// Without `after`, the unfiltered detections are scored on both sides.
pub fn run_eval(cfg: &PipelineConfig, ground_truth: &Path, before: &Path, after: Option<&Path>) -> Result<eval::MetricsReport> {
    let table = cfg.profile.category_table()?;
    let gt: CocoDataset = coco::read_json(ground_truth)?;
    let gts = eval::ground_truth_from_coco(&gt)?;
    let load = |p: &Path| -> Result<Vec<Detection>> {
        filter::detections_from_coco(&coco::read_json::<Vec<CocoResult>>(p)?, &table)
    };
    let before = load(before)?;
    let after = match after {
        Some(p) => load(p)?,
        None => before.clone(),
    };
    Ok(eval::metrics_report(&gts, &before, &after, &cfg.profile.novel, cfg.eval.min_confidence))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> Profile {
        Profile {
            kind: ProfileKind::Voc,
            base: vec!["aeroplane".into(), "bicycle".into()],
            novel: vec!["bird".into(), "bus".into()],
            shots: 1,
        }
    }

    #[test]
    fn defaults_follow_best_configuration() {
        let c = PipelineConfig::new(profile());
        assert_eq!(c.selection.g, 20);
        assert_eq!(c.selection.strategy, Strategy::SpectralCluster);
        assert_eq!(c.filter.clip_thresh, 0.1);
        assert_eq!(c.filter_config().list_mode, ListMode::BaseAndNovel);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn overlapping_categories_rejected() {
        let mut p = profile();
        p.novel.push("bicycle".into());
        assert!(matches!(
            PipelineConfig::new(p).validate(),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let text = r#"
            seed = 3
            asset_root = "assets"
            prompt_scheme = "a5"

            [profile]
            kind = "coco"
            base = ["person"]
            novel = ["horse", "sheep"]

            [selection]
            strategy = "kmeans-cluster"
            g = 4

            [compose]
            mode = "saliency"
            scale_min = 0.5

            [filter]
            clip_thresh = 0.2
        "#;
        let c = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(c.selection.strategy, Strategy::KmeansCluster);
        assert_eq!(c.compose.mode, compositor::PasteMode::SaliencyMap);
        assert_eq!(c.filter_config().list_mode, ListMode::NovelOnly);
        assert_eq!(c.prompt_scheme, PromptScheme::A5);

        let mut moved = c.clone();
        moved.asset_root = Some("/elsewhere".into());
        assert_eq!(c.hash(), moved.hash());
        let mut other = c.clone();
        other.seed = 4;
        assert_ne!(c.hash(), other.hash());

        assert!(PipelineConfig::from_toml("[profile]\nbase=[]\nnovel=['a']\nbogus=1").is_err());
    }
}
