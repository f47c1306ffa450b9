use std::path::{Path, PathBuf};

use anyhow::{Context, bail};
use clap::{Args, Parser, Subcommand};

use synthfsod::coco;
use synthfsod::compositor::PasteMode;
use synthfsod::filter::ListMode;
use synthfsod::fixture::{self, FixtureSpec};
use synthfsod::pipeline::{self, ASSET_ROOT_ENV, FilterInputs, PipelineConfig, Profile, ProfileKind, RunOptions};
use synthfsod::prompts::PromptScheme;
use synthfsod::selector::Strategy;

#[derive(Parser)]
#[command(name = "synthfsod", version, about = "Synthetic-data pipeline for few-shot object detection")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write text-to-image prompts for the novel categories.
    Prompts {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long)]
        scheme: Option<PromptScheme>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pick G representative candidates per novel category.
    Select {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long, env = ASSET_ROOT_ENV)]
        assets: Option<PathBuf>,
        #[arg(long, default_value = "selection.json")]
        out: PathBuf,
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Paste selected candidates onto backgrounds and write a COCO dataset.
    Compose {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        compose: ComposeArgs,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long, env = ASSET_ROOT_ENV)]
        assets: Option<PathBuf>,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Drop detections whose CLIP score falls under the threshold.
    Filter {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        filter: FilterArgs,
        /// Default location for the inputs below.
        #[arg(long, env = ASSET_ROOT_ENV)]
        assets: Option<PathBuf>,
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        crops: Option<PathBuf>,
        #[arg(long)]
        texts: Option<PathBuf>,
        #[arg(long)]
        texts_manifest: Option<PathBuf>,
        #[arg(long, default_value = "filtered.json")]
        out: PathBuf,
        #[arg(long)]
        removed: Option<PathBuf>,
    },
    /// AP50 per novel class and FP ratio before/after filtering.
    Eval {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long)]
        min_confidence: Option<f64>,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Unfiltered detections.
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        filtered: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every enabled stage into `<out>/run-<config hash>/`.
    Run {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long)]
        scheme: Option<PromptScheme>,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        compose: ComposeArgs,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        min_confidence: Option<f64>,
        /// Comma-separated subset of prompts,select,compose,filter,eval.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
        #[arg(long, env = ASSET_ROOT_ENV)]
        assets: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Worker cap; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Write a deterministic synthetic asset set.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        candidates: usize,
    },
}

#[derive(Args)]
struct ProfileArgs {
    /// Pipeline TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    base: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    novel: Vec<String>,
    #[arg(long)]
    kind: Option<ProfileKind>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ProfileArgs {
    fn load(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => {
                if self.novel.is_empty() {
                    bail!("either --config or --novel is required");
                }
                PipelineConfig::new(Profile {
                    kind: ProfileKind::default(),
                    base: Vec::new(),
                    novel: Vec::new(),
                    shots: 1,
                })
            }
        };
        if !self.base.is_empty() {
            cfg.profile.base = self.base.clone();
        }
        if !self.novel.is_empty() {
            cfg.profile.novel = self.novel.clone();
        }
        if let Some(k) = self.kind {
            cfg.profile.kind = k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Synthetic instances per category.
    #[arg(long)]
    g: Option<usize>,
    /// Cluster count; must equal G for the cluster strategies.
    #[arg(long)]
    k: Option<usize>,
    /// Spectral affinity bandwidth; median pairwise distance when omitted.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl SelectArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let s = &mut cfg.selection;
        if let Some(v) = self.strategy {
            s.strategy = v;
        }
        if let Some(v) = self.g {
            s.g = v;
        }
        if self.k.is_some() {
            s.k = self.k;
        }
        if self.sigma.is_some() {
            s.sigma = self.sigma;
        }
        if let Some(v) = self.max_iters {
            s.max_iters = v;
        }
    }
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long)]
    mode: Option<PasteMode>,
    /// Saliency binarization threshold (0-255).
    #[arg(long)]
    threshold: Option<u8>,
    #[arg(long)]
    scale_min: Option<f64>,
    #[arg(long)]
    scale_max: Option<f64>,
    #[arg(long)]
    overlap_max: Option<f64>,
    #[arg(long)]
    max_attempts: Option<usize>,
}

impl ComposeArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let c = &mut cfg.compose;
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.threshold {
            c.threshold = v;
        }
        if let Some(v) = self.scale_min {
            c.scale_min = v;
        }
        if let Some(v) = self.scale_max {
            c.scale_max = v;
        }
        if let Some(v) = self.overlap_max {
            c.overlap_max = v;
        }
        if let Some(v) = self.max_attempts {
            c.max_attempts = v;
        }
    }
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    clip_thresh: Option<f64>,
    /// novel | all
    #[arg(long)]
    list_mode: Option<ListMode>,
    #[arg(long)]
    temperature: Option<f64>,
}

impl FilterArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = self.clip_thresh {
            cfg.filter.clip_thresh = v;
        }
        if self.list_mode.is_some() {
            cfg.filter.list_mode = self.list_mode;
        }
        if let Some(v) = self.temperature {
            cfg.filter.temperature = v;
        }
    }
}

fn asset_root(flag: Option<PathBuf>, cfg: &PipelineConfig) -> anyhow::Result<PathBuf> {
    flag.or_else(|| cfg.asset_root.clone())
        .with_context(|| format!("no asset root: pass --assets, set {ASSET_ROOT_ENV}, or set asset_root in the config"))
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => coco::write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn set_stages(cfg: &mut PipelineConfig, names: &[String]) -> anyhow::Result<()> {
    if names.is_empty() {
        return Ok(());
    }
    let s = &mut cfg.stages;
    *s = pipeline::Stages {
        prompts: false,
        select: false,
        compose: false,
        filter: false,
        eval: false,
    };
    for n in names {
        match n.trim() {
            "prompts" => s.prompts = true,
            "select" => s.select = true,
            "compose" => s.compose = true,
            "filter" => s.filter = true,
            "eval" => s.eval = true,
            other => bail!("unknown stage {other:?}"),
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Prompts { profile, scheme, out } => {
            let mut cfg = profile.load()?;
            if let Some(s) = scheme {
                cfg.prompt_scheme = s;
            }
            cfg.validate()?;
            let records = synthfsod::prompts::prompt_records(&cfg.profile.novel, cfg.prompt_scheme)?;
            emit(&records, out.as_deref())
        }
        Command::Select {
            profile,
            select,
            assets,
            out,
            diagnostics,
            jobs,
        } => {
            let mut cfg = profile.load()?;
            select.apply(&mut cfg);
            cfg.validate()?;
            let root = asset_root(assets, &cfg)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(pipeline::resolve_jobs(jobs))
                .build()?;
            let (records, diag) = pool.install(|| pipeline::run_selection(&cfg, &root))?;
            coco::write_json(&out, &records)?;
            if let Some(d) = diagnostics {
                coco::write_json(&d, &diag)?;
            }
            Ok(())
        }
        Command::Compose {
            profile,
            compose,
            selection,
            assets,
            out,
            jobs,
        } => {
            let mut cfg = profile.load()?;
            compose.apply(&mut cfg);
            cfg.validate()?;
            let root = asset_root(assets, &cfg)?;
            let ds = pipeline::run_compose(&cfg, &selection, &root, jobs)?;
            ds.write(&out)?;
            Ok(())
        }
        Command::Filter {
            profile,
            filter,
            assets,
            detections,
            crops,
            texts,
            texts_manifest,
            out,
            removed,
        } => {
            let mut cfg = profile.load()?;
            filter.apply(&mut cfg);
            cfg.validate()?;
            let mut inputs = match asset_root(assets, &cfg) {
                Ok(root) => FilterInputs::under(&root),
                Err(_) => FilterInputs::under(Path::new(".")),
            };
            if let Some(p) = detections {
                inputs.detections = p;
            }
            if let Some(p) = crops {
                inputs.crops = p;
            }
            if let Some(p) = texts {
                inputs.texts = p;
            }
            if let Some(p) = texts_manifest {
                inputs.texts_manifest = p;
            }
            let (kept, rem) = pipeline::run_filter(&cfg, &inputs)?;
            coco::write_json(&out, &kept)?;
            if let Some(p) = removed {
                coco::write_json(&p, &rem)?;
            }
            Ok(())
        }
        Command::Eval {
            profile,
            min_confidence,
            ground_truth,
            detections,
            filtered,
            out,
        } => {
            let mut cfg = profile.load()?;
            if let Some(m) = min_confidence {
                cfg.eval.min_confidence = m;
            }
            cfg.validate()?;
            let report = pipeline::run_eval(&cfg, &ground_truth, &detections, filtered.as_deref())?;
            emit(&report, out.as_deref())
        }
        Command::Run {
            profile,
            scheme,
            select,
            compose,
            filter,
            min_confidence,
            stages,
            assets,
            out,
            jobs,
        } => {
            let mut cfg = profile.load()?;
            if let Some(s) = scheme {
                cfg.prompt_scheme = s;
            }
            select.apply(&mut cfg);
            compose.apply(&mut cfg);
            filter.apply(&mut cfg);
            if let Some(m) = min_confidence {
                cfg.eval.min_confidence = m;
            }
            set_stages(&mut cfg, &stages)?;
            let root = asset_root(assets, &cfg)?;
            let artifacts = pipeline::run_pipeline(
                &cfg,
                &RunOptions {
                    asset_root: root,
                    out_root: out,
                    jobs,
                },
            )?;
            emit(&artifacts, None)
        }
        Command::Fixture { out, seed, candidates } => {
            let spec = FixtureSpec {
                seed,
                candidates,
                ..Default::default()
            };
            let summary = fixture::generate(&out, &spec)?;
            eprintln!(
                "wrote {} candidates and {} detections to {}",
                summary.candidates,
                summary.detections,
                out.display()
            );
            Ok(())
        }
    }
}
