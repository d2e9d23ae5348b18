use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpgs_core::atm::check_forest;
use lpgs_core::codec::{self, load_ply_points, write_ply_points, PlyFormat, StorageReport};
use lpgs_core::config::Preset;
use lpgs_core::raster::{render, render_cached};
use lpgs_core::synth::{generate, render_gaussians, SynthConfig};
use lpgs_core::trainer::{psnr, ssim, LogRecord, TrainConfig, TrainView, Trainer};
use lpgs_core::{ContractionMode, Image, SceneModel, TreeCache};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::manifest::{DatasetManifest, ImageEntry, InitBox, Split, SplitFilter, MANIFEST_VERSION};
use crate::CliError;

/// Parents allowed per initial parent unless `--max-parents` is given.
pub const DEFAULT_GROWTH_CAP: usize = 12;
pub const DEFAULT_DENSIFY_START: usize = 500;

#[derive(Debug, Parser)]
#[command(name = "lpgs", version, about = "Predictive parent/child Gaussian splats on the CPU")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of random splats seen from random cameras.
    Synth(SynthArgs),
    /// Train a model on a dataset and save it.
    Train(TrainArgs),
    /// Render manifest cameras to PNG.
    Render(RenderArgs),
    /// Report PSNR/SSIM against a dataset plus storage figures.
    Eval(EvalArgs),
    /// Print the header and layout of a model file.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub n_gaussians: usize,
    #[arg(long, default_value_t = 20)]
    pub n_cameras: usize,
    /// Held-out views written with split `test`.
    #[arg(long, default_value_t = 1)]
    pub n_test: usize,
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    /// Standard deviation of the noise added to the initial points.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 0.0])]
    pub background: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContractionArg {
    Verbatim,
    Continuous,
}

impl From<ContractionArg> for ContractionMode {
    fn from(c: ContractionArg) -> Self {
        match c {
            ContractionArg::Verbatim => ContractionMode::Verbatim,
            ContractionArg::Continuous => ContractionMode::Continuous,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Dataset directory containing `manifest.toml`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// c1, c2, c3 or c1-mini.
    #[arg(long, default_value = "c1")]
    pub preset: Preset,
    /// Children per parent; the preset value when omitted.
    #[arg(long)]
    pub children: Option<usize>,
    #[arg(long, default_value_t = 30_000)]
    pub steps: usize,
    /// Defaults to a quarter of `--steps`.
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub warmup_downscale: usize,
    #[arg(long, default_value_t = DEFAULT_DENSIFY_START)]
    pub densify_start: usize,
    /// Defaults to half of `--steps`.
    #[arg(long)]
    pub densify_end: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub densify_interval: usize,
    #[arg(long)]
    pub child_threshold: Option<f64>,
    #[arg(long)]
    pub parent_threshold: Option<f64>,
    /// Track parent statistics only; children are never promoted.
    #[arg(long)]
    pub no_promote: bool,
    /// Disable densification and pruning entirely.
    #[arg(long)]
    pub no_atm: bool,
    /// Defaults to 12 times the initial parent count.
    #[arg(long)]
    pub max_parents: Option<usize>,
    #[arg(long, value_enum, default_value = "verbatim")]
    pub contraction: ContractionArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub psnr_interval: usize,
    /// JSON-lines log; defaults to the model path with `.log.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose manifest supplies the cameras.
    #[arg(long)]
    pub data: PathBuf,
    /// Manifest image index; repeatable. All cameras when omitted.
    #[arg(long = "camera")]
    pub cameras: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Expand geometry once and recompute only colours per frame.
    #[arg(long)]
    pub cached: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// all, train or test.
    #[arg(long, default_value = "all")]
    pub split: SplitFilter,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub json: bool,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => {
            let s = synth(&a)?;
            println!(
                "wrote {} train + {} test views and {} init points to {}",
                s.train, s.test, s.init_points, a.out.display()
            );
        }
        Command::Train(a) => {
            let quiet = a.quiet;
            let s = train(&a, |_, rec| {
                if !quiet {
                    print_progress(rec);
                }
                Ok(())
            })?;
            println!(
                "trained {} steps in {:.1}s: {} parents, {} splats",
                s.steps, s.seconds, s.report.parents, s.report.splats
            );
            println!("{}", s.report);
        }
        Command::Render(a) => {
            for f in render_frames(&a)? {
                eprintln!("camera {:>4}: {:>9.2} ms -> {}", f.camera, f.millis, f.path.display());
            }
        }
        Command::Eval(a) => {
            let r = eval(&a)?;
            if a.json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("{r}");
            }
        }
        Command::Info(a) => {
            let r = info(&a)?;
            if a.json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("{r}");
            }
        }
    }
    Ok(())
}

fn print_progress(rec: &LogRecord) {
    match rec {
        LogRecord::Step(s) => {
            if let Some(p) = s.psnr {
                println!(
                    "step {:>6}  loss {:.5}  psnr {:6.2}  parents {}",
                    s.step + 1,
                    s.loss,
                    p,
                    s.parents
                );
            }
        }
        LogRecord::Atm(e) => {
            if e.step % 1000 == 0 {
                println!(
                    "atm {:>6}  +{} promoted  +{} cloned  +{} split  -{} pruned  -> {} parents",
                    e.step, e.promotions, e.clones, e.splits, e.prunes, e.parents
                );
            }
        }
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn background(v: &[f64]) -> Result<[f64; 3], CliError> {
    <[f64; 3]>::try_from(v).map_err(|_| CliError::InvalidArgument("background needs three components".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub train: usize,
    pub test: usize,
    pub init_points: usize,
}

pub fn synth(args: &SynthArgs) -> Result<SynthSummary, CliError> {
    if args.resolution == 0 {
        return Err(CliError::InvalidArgument("resolution must be positive".into()));
    }
    if args.n_cameras + args.n_test == 0 {
        return Err(CliError::InvalidArgument("at least one camera is required".into()));
    }
    let cfg = SynthConfig {
        seed: args.seed,
        n_gaussians: args.n_gaussians,
        n_cameras: args.n_cameras,
        n_test: args.n_test,
        resolution: args.resolution,
        background: background(&args.background)?,
        init_jitter: args.jitter,
        ..SynthConfig::default()
    };
    let scene = generate(&cfg);
    let images_dir = args.out.join("images");
    create_dir(&images_dir)?;

    let mut images = Vec::new();
    let views = scene
        .train_cameras
        .iter()
        .map(|c| (Split::Train, c))
        .chain(scene.test_cameras.iter().map(|c| (Split::Test, c)));
    let mut counters = [0usize; 2];
    for (split, camera) in views {
        let n = &mut counters[split as usize];
        let rel = PathBuf::from("images").join(format!("{split}_{:04}.png", *n));
        *n += 1;
        let path = args.out.join(&rel);
        render_gaussians(&scene.gaussians, camera, cfg.background)
            .save_png(&path)
            .map_err(|source| CliError::Image { path, source })?;
        images.push(ImageEntry {
            path: rel,
            split,
            camera: camera.clone(),
        });
    }

    let ply = PathBuf::from("init.ply");
    let ply_path = args.out.join(&ply);
    let mut sink = BufWriter::new(File::create(&ply_path).map_err(|e| CliError::io(&ply_path, e))?);
    write_ply_points(&mut sink, &scene.init_points, PlyFormat::BinaryLittleEndian)?;
    sink.flush().map_err(|e| CliError::io(&ply_path, e))?;

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        resolution: [args.resolution; 2],
        background: cfg.background,
        init_ply: Some(ply),
        init_box: Some(InitBox {
            count: args.n_gaussians.max(2),
            min: [-1.0; 3],
            max: [1.0; 3],
        }),
        images,
    };
    manifest.save(&args.out)?;
    Ok(SynthSummary {
        train: counters[0],
        test: counters[1],
        init_points: scene.init_points.len(),
    })
}

/// Manifest images of one split with their cameras, decoded to floats.
pub fn load_views(dir: &Path, manifest: &DatasetManifest, filter: SplitFilter) -> Result<Vec<TrainView<f32>>, CliError> {
    manifest
        .select(filter)
        .into_iter()
        .map(|i| {
            let e = &manifest.images[i];
            let path = dir.join(&e.path);
            let image: Image<f32> = Image::load_png(&path).map_err(|source| CliError::Image {
                path: path.clone(),
                source,
            })?;
            if (image.width, image.height) != (e.camera.width, e.camera.height) {
                return Err(CliError::ImageSize {
                    path,
                    got: [image.width, image.height],
                    expected: [e.camera.width, e.camera.height],
                });
            }
            Ok(TrainView {
                camera: e.camera.clone(),
                image,
            })
        })
        .collect()
}

/// Initial parent positions: the manifest's PLY, else uniform samples in its
/// declared box.
pub fn initial_points(dir: &Path, manifest: &DatasetManifest, seed: u64) -> Result<Vec<[f64; 3]>, CliError> {
    if let Some(ply) = &manifest.init_ply {
        let points = load_ply_points(dir.join(ply))?;
        if !points.is_empty() {
            return Ok(points);
        }
    }
    let Some(b) = &manifest.init_box else {
        return Err(CliError::Manifest("no init points: init_ply is missing or empty and there is no init_box".into()));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..b.count)
        .map(|_| [0, 1, 2].map(|a| rng.random_range(b.min[a]..b.max[a])))
        .collect())
}

/// Everything a training run needs, before the first step.
pub struct TrainSetup {
    pub model: SceneModel<f32>,
    pub views: Vec<TrainView<f32>>,
    pub config: TrainConfig,
}

pub fn prepare_training(args: &TrainArgs) -> Result<TrainSetup, CliError> {
    let manifest = DatasetManifest::load(&args.data)?;
    let views = load_views(&args.data, &manifest, SplitFilter::Only(Split::Train))?;
    let points = initial_points(&args.data, &manifest, args.seed)?;
    let mut model_cfg = args.preset.config();
    if let Some(k) = args.children {
        model_cfg.children_per_parent = k;
    }
    let model = SceneModel::initialize(model_cfg, &points, args.contraction.into(), args.seed)?;

    let mut config = TrainConfig {
        total_steps: args.steps,
        warmup_steps: args.warmup_steps.unwrap_or(args.steps / 4),
        warmup_downscale: args.warmup_downscale,
        densify_start: args.densify_start,
        densify_end: args.densify_end.unwrap_or(args.steps / 2),
        densify_interval: args.densify_interval,
        atm_enabled: !args.no_atm,
        seed: args.seed,
        background: manifest.background,
        psnr_interval: args.psnr_interval,
        ..TrainConfig::default()
    };
    if let Some(t) = args.child_threshold {
        config.atm.child_grad_threshold = t;
    }
    if let Some(t) = args.parent_threshold {
        config.atm.parent_grad_threshold = t;
    }
    config.atm.promote_children = !args.no_promote;
    config.atm.max_parents = args
        .max_parents
        .unwrap_or(DEFAULT_GROWTH_CAP * model.parents.len());
    config.validate()?;
    Ok(TrainSetup { model, views, config })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: SceneModel<f32>,
    pub report: StorageReport,
    pub steps: usize,
    pub events: usize,
    pub seconds: f64,
    pub log: PathBuf,
}

#[derive(Serialize)]
struct ConfigRecord<'a> {
    kind: &'static str,
    data: &'a Path,
    init_parents: usize,
    contraction: ContractionMode,
    model: &'a lpgs_core::ModelConfig,
    train: &'a TrainConfig,
}

pub fn default_log_path(model: &Path) -> PathBuf {
    model.with_extension("log.jsonl")
}

/// Train and save. `hook` sees the trainer after every log record; the
/// forest is checked after every densify event.
pub fn train(
    args: &TrainArgs,
    mut hook: impl FnMut(&Trainer<f32>, &LogRecord) -> Result<(), CliError>,
) -> Result<TrainSummary, CliError> {
    let setup = prepare_training(args)?;
    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(&args.out));
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?);
    let write_line = |log: &mut BufWriter<File>, line: String| {
        writeln!(log, "{line}").map_err(|e| CliError::io(&log_path, e))
    };
    let header = ConfigRecord {
        kind: "config",
        data: &args.data,
        init_parents: setup.model.parents.len(),
        contraction: setup.model.contraction.mode,
        model: &setup.model.config,
        train: &setup.config,
    };
    write_line(&mut log, serde_json::to_string(&header)?)?;

    let start = Instant::now();
    let mut trainer = Trainer::new(setup.model, setup.views, setup.config)?;
    let mut events = 0;
    while !trainer.is_done() {
        let (rec, ev) = trainer.advance()?;
        let rec = LogRecord::Step(rec);
        write_line(&mut log, serde_json::to_string(&rec)?)?;
        hook(&trainer, &rec)?;
        if let Some(ev) = ev {
            check_forest(&trainer.model)?;
            events += 1;
            let rec = LogRecord::Atm(ev);
            write_line(&mut log, serde_json::to_string(&rec)?)?;
            hook(&trainer, &rec)?;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    log.flush().map_err(|e| CliError::io(&log_path, e))?;
    let report = codec::save_file(&trainer.model, &args.out)?;
    Ok(TrainSummary {
        model: trainer.model,
        report,
        steps: trainer.step,
        events,
        seconds,
        log: log_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub camera: usize,
    pub path: PathBuf,
    pub millis: f64,
}

pub fn render_frames(args: &RenderArgs) -> Result<Vec<FrameReport>, CliError> {
    let model = codec::load_file(&args.model)?;
    let manifest = DatasetManifest::load(&args.data)?;
    let count = manifest.images.len();
    let ids: Vec<usize> = if args.cameras.is_empty() {
        (0..count).collect()
    } else {
        args.cameras.clone()
    };
    if let Some(&id) = ids.iter().find(|&&id| id >= count) {
        return Err(CliError::UnknownCamera { id, count });
    }
    create_dir(&args.out)?;
    let bg = manifest.background.map(|v| v as f32);
    let cache = if args.cached {
        Some(TreeCache::build(&model).map_err(lpgs_core::raster::RasterError::from)?)
    } else {
        None
    };
    let mut frames = Vec::with_capacity(ids.len());
    for id in ids {
        let camera = &manifest.images[id].camera;
        let start = Instant::now();
        let out = match &cache {
            Some(c) => render_cached(&model, c, camera, bg)?,
            None => render(&model, camera, bg)?,
        };
        let millis = start.elapsed().as_secs_f64() * 1e3;
        let path = args.out.join(format!("render_{id:04}.png"));
        out.image
            .save_png(&path)
            .map_err(|source| CliError::Image { path: path.clone(), source })?;
        frames.push(FrameReport { camera: id, path, millis });
    }
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub camera: usize,
    pub path: PathBuf,
    pub split: Split,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitMean {
    pub split: Split,
    pub images: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub means: Vec<SplitMean>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub storage: StorageReport,
}

impl EvalReport {
    pub fn mean(&self, split: Split) -> Option<&SplitMean> {
        self.means.iter().find(|m| m.split == split)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6}  {:<28}{:<7}{:>9}{:>9}", "camera", "image", "split", "psnr", "ssim")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>6}  {:<28}{:<7}{:>9.3}{:>9.4}",
                r.camera,
                r.path.display(),
                r.split.to_string(),
                r.psnr,
                r.ssim
            )?;
        }
        for m in &self.means {
            writeln!(f, "mean {:<5} ({} images){:>20.3}{:>9.4}", m.split.to_string(), m.images, m.psnr, m.ssim)?;
        }
        writeln!(f, "mean all{:>32.3}{:>9.4}", self.mean_psnr, self.mean_ssim)?;
        writeln!(f)?;
        write!(f, "{}", self.storage)
    }
}

pub fn eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let model = codec::load_file(&args.model)?;
    let storage = codec::storage_report(&model);
    let manifest = DatasetManifest::load(&args.data)?;
    let ids = manifest.select(args.split);
    if ids.is_empty() {
        return Err(CliError::InvalidArgument("no manifest images in the requested split".into()));
    }
    let views = load_views(&args.data, &manifest, args.split)?;
    let bg = manifest.background.map(|v| v as f32);
    let mut rows = Vec::with_capacity(ids.len());
    for (id, view) in ids.into_iter().zip(&views) {
        let out = render(&model, &view.camera, bg)?;
        rows.push(EvalRow {
            camera: id,
            path: manifest.images[id].path.clone(),
            split: manifest.images[id].split,
            psnr: psnr(&out.image, &view.image)?,
            ssim: ssim(&out.image, &view.image)? as f64,
        });
    }
    let mean_of = |rows: &[&EvalRow]| {
        let n = rows.len() as f64;
        (
            rows.iter().map(|r| r.psnr).sum::<f64>() / n,
            rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        )
    };
    let means = [Split::Train, Split::Test]
        .into_iter()
        .filter_map(|s| {
            let sel: Vec<&EvalRow> = rows.iter().filter(|r| r.split == s).collect();
            (!sel.is_empty()).then(|| {
                let (psnr, ssim) = mean_of(&sel);
                SplitMean {
                    split: s,
                    images: sel.len(),
                    psnr,
                    ssim,
                }
            })
        })
        .collect();
    let (mean_psnr, mean_ssim) = mean_of(&rows.iter().collect::<Vec<_>>());
    Ok(EvalReport {
        rows,
        means,
        mean_psnr,
        mean_ssim,
        storage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoReport {
    pub format_version: u32,
    pub parents: usize,
    pub children_per_parent: usize,
    pub splats: usize,
    pub feature_dim: usize,
    pub attention_lambda: f64,
    pub sh_degree: usize,
    pub hidden_width: usize,
    pub grid_levels: usize,
    pub grid_table_size: usize,
    pub grid_features_per_level: usize,
    pub grid_base_resolution: usize,
    pub grid_growth: f64,
    pub contraction: ContractionMode,
    pub center: [f64; 3],
    pub r_inner: f64,
    pub r_outer: f64,
    pub offset_scale: f64,
    /// Fractions of init, densified and promoted parents.
    pub provenance: [f64; 3],
    pub storage: StorageReport,
}

impl InfoReport {
    pub fn of(model: &SceneModel<f32>) -> Self {
        let c = &model.config;
        Self {
            format_version: codec::FORMAT_VERSION,
            parents: model.parents.len(),
            children_per_parent: c.children_per_parent,
            splats: model.splat_count(),
            feature_dim: c.feature_dim,
            attention_lambda: c.attention_lambda,
            sh_degree: c.sh_degree,
            hidden_width: c.hidden_width,
            grid_levels: c.grid.levels,
            grid_table_size: c.grid.table_size,
            grid_features_per_level: c.grid.features_per_level,
            grid_base_resolution: c.grid.base_resolution,
            grid_growth: c.grid.growth_factor,
            contraction: model.contraction.mode,
            center: model.contraction.center,
            r_inner: model.contraction.r_inner,
            r_outer: model.contraction.r_outer,
            offset_scale: model.offset_scale,
            provenance: model.provenance_fractions(),
            storage: codec::storage_report(model),
        }
    }
}

impl fmt::Display for InfoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "format version       {}", self.format_version)?;
        writeln!(f, "parents              {}", self.parents)?;
        writeln!(f, "children per parent  {}", self.children_per_parent)?;
        writeln!(f, "splats               {}", self.splats)?;
        writeln!(f, "feature dim          {}", self.feature_dim)?;
        writeln!(f, "attention lambda     {}", self.attention_lambda)?;
        writeln!(f, "sh degree            {}", self.sh_degree)?;
        writeln!(f, "hidden width         {}", self.hidden_width)?;
        writeln!(
            f,
            "grid                 {} levels x 2^{} entries x {} features, base {}, growth {:.4}",
            self.grid_levels,
            self.grid_table_size.trailing_zeros(),
            self.grid_features_per_level,
            self.grid_base_resolution,
            self.grid_growth
        )?;
        writeln!(
            f,
            "contraction          {:?}, centre {:?}, r_inner {:.6}, r_outer {:.6}",
            self.contraction, self.center, self.r_inner, self.r_outer
        )?;
        writeln!(f, "child offset scale   {:.6}", self.offset_scale)?;
        let [i, d, p] = self.provenance;
        writeln!(f, "provenance           init {i:.3}  densified {d:.3}  promoted {p:.3}")?;
        writeln!(f)?;
        write!(f, "{}", self.storage)
    }
}

pub fn info(args: &InfoArgs) -> Result<InfoReport, CliError> {
    Ok(InfoReport::of(&codec::load_file(&args.model)?))
}
