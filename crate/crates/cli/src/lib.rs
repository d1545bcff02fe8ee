//! Command implementations behind the `pgcn` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use pgcn_core::autodiff::{write_checkpoint, ParamStore};
use pgcn_core::features::{build_features, GraphScaleMode, MirrorMode, Phase};
use pgcn_core::graph::{build_adjacency, GraphOptions, LabelingStrategy, LabeledAdjacency, SkeletonLayout};
use pgcn_core::nn::{check_component, GradComponent, Model, ModelConfig};
use pgcn_core::skeleton_io::{
    load_samples, parse_ntu_bytes, parse_ntu_name, parse_sbu, read_canonical, to_sequence, write_canonical, write_feature,
    BranchTag, DatasetManifest, ManifestEntry, SampleMeta, SbuLayout, SkeletonSequence, SplitFilter, NTU_JOINTS, SBU_JOINTS,
};
use pgcn_core::train::{
    condition_sequence, evaluate, make_toy_dataset, mode_grid, run_ablation, strategy_grid, train, write_toy_dataset,
    AblationRow, EvalReport, MetricRecord, TrainConfig, Variant,
};

#[derive(Debug, Parser)]
#[command(name = "pgcn", version, about = "Two-person graph convolutional networks for skeleton interaction recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert raw captures into canonical containers plus a manifest.
    Ingest(IngestArgs),
    /// Compute and cache the four input streams of every sample.
    Preprocess(PreprocessArgs),
    /// Build a labelled adjacency and optionally export it as JSON.
    Graph(GraphArgs),
    /// Train a model; writes checkpoints and a JSON-lines metrics log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a split.
    Eval(EvalArgs),
    /// Finite-difference gradient checks of the network layers.
    Gradcheck(GradcheckArgs),
    /// Print parameter count and FLOP estimate of a configuration.
    Info(InfoArgs),
    /// Generate the synthetic four-class interaction set.
    Toydata(ToydataArgs),
    /// Multi-seed comparison of graph-scale modes and labeling strategies.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ntu,
    Sbu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Ntu,
    Sbu,
}

impl From<LayoutArg> for SkeletonLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Ntu => SkeletonLayout::Ntu,
            LayoutArg::Sbu => SkeletonLayout::Sbu,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MirrorArg {
    Reflect,
    Copy,
}

impl From<MirrorArg> for MirrorMode {
    fn from(m: MirrorArg) -> Self {
        match m {
            MirrorArg::Reflect => MirrorMode::Reflect,
            MirrorArg::Copy => MirrorMode::Copy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-size network.
    Full,
    /// Narrow network for CPU-scale runs.
    Tiny,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    pub format: Format,
    /// Output directory for containers and `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Capture files or directories searched recursively.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Class count; defaults to the largest label plus one.
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// File listing sample names to skip, one per line.
    #[arg(long)]
    pub skip_list: Option<PathBuf>,
    /// SBU lines carry no leading frame index.
    #[arg(long)]
    pub sbu_no_index: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Split filter JSON restricting the samples.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "J,B,JM,BM")]
    pub branches: Vec<BranchTag>,
    #[arg(long, default_value = "symmetry")]
    pub mode: GraphScaleMode,
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    #[arg(long, value_enum, default_value = "ntu")]
    pub layout: LayoutArg,
    #[arg(long, value_enum, default_value = "reflect")]
    pub mirror: MirrorArg,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub strategy: LabelingStrategy,
    #[arg(long, value_enum, default_value = "ntu")]
    pub layout: LayoutArg,
    /// `baseline` builds the single-person graph; every other mode the two-person graph.
    #[arg(long, default_value = "mutual")]
    pub mode: GraphScaleMode,
    /// Canonical container supplying coordinates for geometric labeling.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long)]
    pub export: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct ModelChoice {
    /// Model configuration JSON; overrides `--preset`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    pub preset: Preset,
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub mode: Option<GraphScaleMode>,
    #[arg(long)]
    pub strategy: Option<LabelingStrategy>,
    #[arg(long, value_enum)]
    pub layout: Option<LayoutArg>,
    #[arg(long)]
    pub frames: Option<usize>,
}

impl ModelChoice {
    pub fn resolve(&self, default_classes: usize) -> Result<ModelConfig> {
        let mut cfg = match &self.config {
            Some(p) => ModelConfig::from_json(&read_text(p)?)?,
            None => match self.preset {
                Preset::Full => ModelConfig::full(default_classes),
                Preset::Tiny => ModelConfig::tiny(default_classes),
            },
        };
        if let Some(n) = self.num_classes {
            cfg.num_classes = n;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(s) = self.strategy {
            cfg.strategy = s;
        }
        if let Some(l) = self.layout {
            cfg.layout = l.into();
        }
        if let Some(f) = self.frames {
            cfg.frames = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelChoice,
    /// Training configuration JSON.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub train_split: Option<PathBuf>,
    #[arg(long)]
    pub val_split: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub warmup_epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Output directory for checkpoints, configs and `metrics.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Model configuration; defaults to `model.json` beside the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value = "reflect")]
    pub mirror: MirrorArg,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Components to check; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub components: Vec<GradComponent>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[command(flatten)]
    pub model: ModelChoice,
}

#[derive(Debug, Args)]
pub struct ToydataArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 32)]
    pub per_class: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AblationTable {
    /// All graph-scale modes under one strategy.
    Modes,
    /// All labeling strategies under one mode.
    Strategies,
    Both,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub table: AblationTable,
    #[command(flatten)]
    pub model: ModelChoice,
    /// Training configuration JSON; defaults to the toy settings.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Dataset manifest; the synthetic toy set is generated in memory when omitted.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub train_split: Option<PathBuf>,
    #[arg(long)]
    pub val_split: Option<PathBuf>,
    /// Seed of the generated toy set.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Samples per class of the generated toy set.
    #[arg(long, default_value_t = 32)]
    pub toy_per_class: usize,
    /// JSON-lines output of the table rows.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(&a).map(|m| println!("ingested {} samples, {} classes", m.entries.len(), m.num_classes)),
        Command::Preprocess(a) => preprocess(&a).map(|n| println!("preprocessed {n} samples")),
        Command::Graph(a) => graph(&a).map(|g| print_graph_summary(&g)),
        Command::Train(a) => train_command(&a, &mut |r| println!("{}", serde_json::to_string(r).unwrap())).map(|s| {
            println!(
                "best held-out top-1 {:.4} at epoch {}; outputs in {}",
                s.best_top1,
                s.best_epoch,
                a.out.display()
            )
        }),
        Command::Eval(a) => eval_command(&a).map(|r| println!("{}", serde_json::to_string_pretty(&r).unwrap())),
        Command::Gradcheck(a) => {
            let results = gradcheck(&a)?;
            for (c, ok, worst) in &results {
                println!("{:<10} {} worst relative error {worst:.3e}", c.name(), if *ok { "PASS" } else { "FAIL" });
            }
            if results.iter().all(|r| r.1) {
                Ok(())
            } else {
                Err(anyhow!("gradient check failed"))
            }
        }
        Command::Info(a) => info(&a).map(|i| {
            println!("parameters: {}", i.params);
            println!("flops: {} ({:.2} G) per sample at {} frames", i.flops, i.flops as f64 / 1e9, i.frames);
            println!("graphs per sample: {}, vertices: {}", i.graphs, i.vertices);
            println!("build time: {:.3} s", i.build_seconds);
        }),
        Command::Toydata(a) => write_toy_dataset(&a.out, a.seed, a.classes, a.per_class)
            .map(|m| println!("wrote {} samples to {}", m.entries.len(), a.out.display()))
            .map_err(Into::into),
        Command::Ablate(a) => ablate(&a, &mut |r| println!("{}", format_row(r))).map(|_| ()),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_split(path: Option<&PathBuf>) -> Result<SplitFilter> {
    match path {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing split {}", p.display())),
        None => Ok(SplitFilter::default()),
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Loads the samples of `manifest` accepted by the split file.
pub fn load_split(manifest: &Path, split: Option<&PathBuf>) -> Result<(DatasetManifest, Vec<SkeletonSequence>)> {
    let m = DatasetManifest::load(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    let filtered = m.filtered(&read_split(split)?);
    let samples = load_samples(&filtered, &manifest_dir(manifest))?;
    Ok((filtered, samples))
}

fn collect_files(inputs: &[PathBuf], keep: &dyn Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    fn walk(p: &Path, keep: &dyn Fn(&Path) -> bool, out: &mut Vec<PathBuf>) -> Result<()> {
        if p.is_dir() {
            let mut entries: Vec<_> = std::fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
            entries.sort();
            for e in entries {
                walk(&e, keep, out)?;
            }
        } else if keep(p) {
            out.push(p.to_path_buf());
        }
        Ok(())
    }
    let mut out = Vec::new();
    for p in inputs {
        if !p.exists() {
            bail!("input {} does not exist", p.display());
        }
        walk(p, keep, &mut out)?;
    }
    Ok(out)
}

/// SBU captures live at `<pair>/<class>/<take>/skeleton_pos.txt`, e.g. `s01s02/03/001`.
fn sbu_meta(path: &Path) -> Result<SampleMeta> {
    let parts: Vec<String> = path
        .iter()
        .rev()
        .skip(1)
        .take(3)
        .map(|s| s.to_string_lossy().into_owned())
        .collect();
    if parts.len() < 3 {
        bail!("cannot derive pair/class/take from {}", path.display());
    }
    let (take, class, pair) = (&parts[0], &parts[1], &parts[2]);
    let label: u32 = class
        .parse::<u32>()
        .ok()
        .and_then(|c| c.checked_sub(1))
        .ok_or_else(|| anyhow!("class directory {class:?} in {} is not a 1-based number", path.display()))?;
    let digits: String = pair.chars().filter(char::is_ascii_digit).collect();
    Ok(SampleMeta {
        sample_id: format!("{pair}_{class}_{take}"),
        label,
        subject_id: digits.parse().unwrap_or(0),
        camera_id: 1,
        setup_id: 1,
    })
}

pub fn ingest(a: &IngestArgs) -> Result<DatasetManifest> {
    let skip: Vec<String> = match &a.skip_list {
        Some(p) => read_text(p)?.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect(),
        None => Vec::new(),
    };
    let files = match a.format {
        Format::Ntu => collect_files(&a.inputs, &|p| p.extension().is_some_and(|e| e == "skeleton"))?,
        Format::Sbu => collect_files(&a.inputs, &|p| p.file_name().is_some_and(|n| n == "skeleton_pos.txt"))?,
    };
    std::fs::create_dir_all(&a.out)?;
    let mut entries = Vec::new();
    for f in files {
        let seq = match a.format {
            Format::Ntu => {
                let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                if skip.contains(&stem) {
                    continue;
                }
                let meta = parse_ntu_name(&stem).ok_or_else(|| anyhow!("cannot read ids from file name {stem:?}"))?;
                let bytes = std::fs::read(&f)?;
                let frames = parse_ntu_bytes(&bytes).with_context(|| format!("parsing {}", f.display()))?;
                to_sequence(&frames, meta).with_context(|| format!("converting {}", f.display()))?
            }
            Format::Sbu => {
                let meta = sbu_meta(&f)?;
                if skip.contains(&meta.sample_id) {
                    continue;
                }
                let layout = SbuLayout {
                    has_index: !a.sbu_no_index,
                };
                parse_sbu(&read_text(&f)?, layout, meta).with_context(|| format!("parsing {}", f.display()))?
            }
        };
        let file = format!("{}.2pgc", seq.meta.sample_id);
        std::fs::write(a.out.join(&file), write_canonical(&seq))?;
        entries.push(ManifestEntry {
            sample_id: seq.meta.sample_id.clone(),
            path: file.into(),
            label: seq.meta.label,
            subject_id: seq.meta.subject_id,
            camera_id: seq.meta.camera_id,
            setup_id: seq.meta.setup_id,
        });
    }
    if entries.is_empty() {
        bail!("no captures found");
    }
    let max_label = entries.iter().map(|e| e.label as usize).max().unwrap_or(0);
    let manifest = DatasetManifest {
        entries,
        num_classes: a.num_classes.unwrap_or(max_label + 1),
        joint_count: match a.format {
            Format::Ntu => NTU_JOINTS,
            Format::Sbu => SBU_JOINTS,
        },
    };
    manifest.validate()?;
    std::fs::write(a.out.join("manifest.json"), manifest.to_json()?)?;
    Ok(manifest)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureIndexEntry {
    pub sample_id: String,
    pub label: u32,
    /// Container per stream tag.
    pub streams: Vec<(BranchTag, PathBuf)>,
}

/// Writes one feature container per sample and stream plus `features.json`.
pub fn preprocess(a: &PreprocessArgs) -> Result<usize> {
    let (manifest, samples) = load_split(&a.manifest, a.split.as_ref())?;
    let cfg = ModelConfig {
        num_classes: manifest.num_classes.max(1),
        layout: a.layout.into(),
        mode: a.mode,
        frames: a.frames,
        ..ModelConfig::default()
    };
    cfg.validate()?;
    let topo = cfg.topology();
    std::fs::create_dir_all(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut index = Vec::with_capacity(samples.len());
    for s in &samples {
        let seq = condition_sequence(s, &cfg, a.mirror.into())?;
        let bundle = build_features(&seq, &topo, cfg.mode, &mut rng, Phase::Eval)?;
        let mut streams = Vec::new();
        for record in bundle.to_records(&s.meta) {
            if !a.branches.contains(&record.tag) {
                continue;
            }
            let file = PathBuf::from(format!("{}.{}.2pgf", s.meta.sample_id, record.tag.short_name()));
            std::fs::write(a.out.join(&file), write_feature(&record))?;
            streams.push((record.tag, file));
        }
        index.push(FeatureIndexEntry {
            sample_id: s.meta.sample_id.clone(),
            label: s.meta.label,
            streams,
        });
    }
    std::fs::write(a.out.join("features.json"), serde_json::to_string_pretty(&index)?)?;
    Ok(index.len())
}

pub fn graph(a: &GraphArgs) -> Result<LabeledAdjacency> {
    let topo = SkeletonLayout::from(a.layout).topology();
    let opts = GraphOptions {
        geometric_threshold: a.threshold,
        ..GraphOptions::default()
    };
    let seq = match &a.sample {
        Some(p) => Some(read_canonical(&std::fs::read(p)?, &p.to_string_lossy())?),
        None => None,
    };
    let g = build_adjacency(a.strategy, &topo, a.mode.two_person(), seq.as_ref(), &opts)?;
    if let Some(path) = &a.export {
        std::fs::write(path, serde_json::to_string(&g.to_json())?)?;
    }
    Ok(g)
}

fn print_graph_summary(g: &LabeledAdjacency) {
    println!("strategy: {}", g.strategy);
    println!("vertices: {}, subsets: {}, edges: {}", g.vertices(), g.subset_count(), g.edge_count());
    for (d, m) in g.subsets.iter().enumerate() {
        let nnz = m.data().iter().filter(|&&x| x != 0.0).count();
        println!("  hop {d}: {nnz} nonzero entries");
    }
}

/// Summary of a `train` invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub best_top1: f64,
    pub final_train_top1: f64,
    pub params: usize,
}

fn resolve_train_config(path: Option<&PathBuf>, default: TrainConfig) -> Result<TrainConfig> {
    match path {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(default),
    }
}

pub fn train_command(a: &TrainArgs, on_metric: &mut dyn FnMut(&MetricRecord)) -> Result<TrainSummary> {
    let full = DatasetManifest::load(&a.manifest)?;
    let model_cfg = a.model.resolve(full.num_classes)?;
    if model_cfg.num_classes != full.num_classes {
        bail!("model has {} classes, manifest {}", model_cfg.num_classes, full.num_classes);
    }
    let mut cfg = resolve_train_config(a.train_config.as_ref(), TrainConfig::default())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(w) = a.warmup_epochs {
        cfg.warmup_epochs = w;
    }
    if let Some(lr) = a.lr {
        cfg.base_lr = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    let (_, train_set) = load_split(&a.manifest, a.train_split.as_ref())?;
    let val_set = match &a.val_split {
        Some(_) => load_split(&a.manifest, a.val_split.as_ref())?.1,
        None => Vec::new(),
    };
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("model.json"), serde_json::to_string_pretty(&model_cfg)?)?;
    std::fs::write(a.out.join("train.json"), serde_json::to_string_pretty(&cfg)?)?;
    let mut log = BufWriter::new(File::create(a.out.join("metrics.jsonl"))?);
    let mut write_err = None;
    let outcome = train(&model_cfg, &cfg, &train_set, &val_set, &mut |r| {
        if let Err(e) = writeln!(log, "{}", serde_json::to_string(r).expect("plain record")).and_then(|_| log.flush()) {
            write_err.get_or_insert(e);
        }
        on_metric(r);
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    std::fs::write(a.out.join("best.ckpt"), write_checkpoint(&outcome.best))?;
    std::fs::write(a.out.join("last.ckpt"), write_checkpoint(&outcome.last))?;
    let final_train_top1 = outcome
        .metrics
        .iter()
        .rev()
        .find(|r| r.split == "train")
        .map_or(f64::NAN, |r| r.top1);
    let summary = TrainSummary {
        best_epoch: outcome.best_epoch,
        best_top1: outcome.best_top1,
        final_train_top1,
        params: outcome.best.count(),
    };
    std::fs::write(a.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Rebuilds the model of `config` and loads `checkpoint` into it.
pub fn load_model(checkpoint: &Path, config: &ModelConfig) -> Result<(Model, ParamStore<f32>)> {
    let mut store = ParamStore::new();
    let model = Model::build(config, &mut store, 0)?;
    store
        .load_checkpoint(&std::fs::read(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?)
        .context("checkpoint does not match the model configuration")?;
    Ok((model, store))
}

pub fn eval_command(a: &EvalArgs) -> Result<EvalReport> {
    let config_path = a.config.clone().unwrap_or_else(|| manifest_dir(&a.checkpoint).join("model.json"));
    let cfg = ModelConfig::from_json(&read_text(&config_path)?)?;
    let (model, store) = load_model(&a.checkpoint, &cfg)?;
    let (_, samples) = load_split(&a.manifest, a.split.as_ref())?;
    Ok(evaluate(&model, &store, &samples, a.mirror.into(), a.batch_size)?)
}

/// `(component, passed, worst error)` per requested component.
pub fn gradcheck(a: &GradcheckArgs) -> Result<Vec<(GradComponent, bool, f64)>> {
    let components = if a.components.is_empty() {
        GradComponent::ALL.to_vec()
    } else {
        a.components.clone()
    };
    components
        .into_iter()
        .map(|c| {
            let r = check_component(c, a.seed)?;
            Ok((c, r.passed(), r.worst()))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub params: usize,
    pub flops: u64,
    pub frames: usize,
    pub graphs: usize,
    pub vertices: usize,
    pub build_seconds: f64,
}

pub fn info(a: &InfoArgs) -> Result<ModelInfo> {
    let start = Instant::now();
    let cfg = a.model.resolve(11)?;
    let mut store = ParamStore::<f32>::new();
    let model = Model::build(&cfg, &mut store, 0)?;
    let flops = model.estimate_flops(cfg.frames);
    Ok(ModelInfo {
        params: store.count(),
        flops,
        frames: cfg.frames,
        graphs: cfg.mode.graphs_per_sample(),
        vertices: cfg.vertices(),
        build_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn format_row(r: &AblationRow) -> String {
    format!(
        "{:<10} {:<12} top1 {:.2} ± {:.2} %  (seeds {:?}, {} params, {} flops)",
        r.mode.name(),
        r.strategy.name(),
        100.0 * r.mean,
        100.0 * r.std,
        r.seeds,
        r.params,
        r.flops
    )
}

pub fn ablate(a: &AblateArgs, on_row: &mut dyn FnMut(&AblationRow)) -> Result<Vec<AblationRow>> {
    let (train_set, val_set, classes) = match &a.manifest {
        Some(m) => {
            let classes = DatasetManifest::load(m)?.num_classes;
            let (_, tr) = load_split(m, a.train_split.as_ref())?;
            let (_, va) = load_split(m, a.val_split.as_ref())?;
            (tr, va, classes)
        }
        None => {
            let (tr, va): (Vec<_>, Vec<_>) = make_toy_dataset(a.data_seed, 4, a.toy_per_class)
                .into_iter()
                .partition(|s| s.meta.setup_id == 1);
            (tr, va, 4)
        }
    };
    let mut base = a.model.resolve(classes)?;
    if a.model.config.is_none() && a.manifest.is_none() {
        // generated toy set: narrow network, four classes
        if a.model.preset == Preset::Full {
            base = ModelConfig {
                mode: base.mode,
                strategy: base.strategy,
                ..ModelConfig::tiny(4)
            };
            if let Some(f) = a.model.frames {
                base.frames = f;
            }
        }
        base.num_classes = 4;
    }
    let mut cfg = resolve_train_config(a.train_config.as_ref(), TrainConfig::toy(0))?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
        cfg.warmup_epochs = cfg.warmup_epochs.min(e.saturating_sub(1));
    }
    let mut variants: Vec<Variant> = Vec::new();
    if matches!(a.table, AblationTable::Modes | AblationTable::Both) {
        variants.extend(mode_grid(a.model.strategy.unwrap_or(LabelingStrategy::Geometric)));
    }
    if matches!(a.table, AblationTable::Strategies | AblationTable::Both) {
        let mode = a.model.mode.unwrap_or(GraphScaleMode::Symmetry);
        for v in strategy_grid(mode) {
            if !variants.contains(&v) {
                variants.push(v);
            }
        }
    }
    let seeds: Vec<u64> = (0..a.seeds as u64).collect();
    let mut out = match &a.out {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    let mut write_err = None;
    let rows = run_ablation(&base, &cfg, &variants, &seeds, &train_set, &val_set, &mut |r| {
        if let Some(w) = out.as_mut() {
            if let Err(e) = writeln!(w, "{}", serde_json::to_string(r).expect("plain row")).and_then(|_| w.flush()) {
                write_err.get_or_insert(e);
            }
        }
        on_row(r);
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    Ok(rows)
}
