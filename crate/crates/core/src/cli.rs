//! The `mercat` command-line tool.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::datagen::{generate, DatasetKind, DatasetSpec, MouthShape, NoiseScale};
use crate::error::{MercatError, Result};
use crate::geometry::{
    apply_rotation, equator_rotation_search, mercator_project, DEFAULT_LAT_CLAMP,
};
use crate::io::{self, RunManifest};
use crate::metrics::{evaluate, MetricsConfig};
use crate::objective::LossSpace;
use crate::spectral::{anchor_effective_ranks, estimator_comparison_with, pca, LoadingScale};
use crate::trainer::{
    fit_with_progress, InitMode, IterationUnit, MomentMode, Preset, RankRule, TrainConfig,
    DEFAULT_MAX_RANK,
};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "MERCAT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "mercat",
    version,
    about = "Angle-preserving sphere embeddings",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    /// Re-run the command recorded in a manifest.
    #[arg(long, value_name = "MANIFEST")]
    pub from_manifest: Option<PathBuf>,

    /// Worker threads (default: $MERCAT_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Fit a sphere embedding to a data CSV.
    Embed(EmbedArgs),
    /// Score an embedding against its data.
    Metrics(MetricsArgs),
    /// Rotate an embedding toward the equator and flatten it.
    Project(ProjectArgs),
    /// Compare spectral and raw angle estimators on a simulated spiked model.
    Spiked(SpikedArgs),
    /// Effective ranks of per-anchor cosine-angle matrices.
    EffectiveRank(EffectiveRankArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: DatasetKind,
    /// Sample count (dataset default if omitted).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ambient dimension of the cluster datasets.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Circle noise level.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Read the circle noise level as a standard deviation, not a variance.
    #[arg(long)]
    pub noise_is_std: bool,
    #[arg(long, value_enum, default_value_t = MouthArg::Lower)]
    pub mouth: MouthArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MouthArg {
    Lower,
    Literal,
}

fn parse_kind(s: &str) -> std::result::Result<DatasetKind, String> {
    s.parse().map_err(|e: MercatError| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Synthetic,
    Mnist,
    LargeAtlas,
    MediumAtlas,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Synthetic => Preset::Synthetic,
            PresetArg::Mnist => Preset::Mnist,
            PresetArg::LargeAtlas => Preset::LargeAtlas,
            PresetArg::MediumAtlas => Preset::MediumAtlas,
        }
    }
}

/// A number, `auto` (hard-threshold rule) or `cap` (`min(50, n, d)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankArg {
    Fixed(usize),
    Auto,
    Cap,
}

fn parse_rank(s: &str) -> std::result::Result<RankArg, String> {
    match s {
        "auto" => Ok(RankArg::Auto),
        "cap" => Ok(RankArg::Cap),
        _ => s
            .parse()
            .map(RankArg::Fixed)
            .map_err(|_| format!("'{s}' is not a rank, 'auto' or 'cap'")),
    }
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Embedding CSV; the loss trace goes to `<out>.loss.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub preset: Option<PresetArg>,
    #[arg(long, value_parser = parse_rank)]
    pub rank: Option<RankArg>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Comma-separated iteration indices at which the step size drops.
    #[arg(long, value_delimiter = ',')]
    pub milestones: Option<Vec<usize>>,
    #[arg(long)]
    pub schedule_factor: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub loss_space: Option<LossSpaceArg>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    #[arg(long, value_enum)]
    pub moments: Option<MomentArg>,
    /// Whether one iteration is a full pass over the anchors or one batch.
    #[arg(long, value_enum)]
    pub iteration_unit: Option<UnitArg>,
    /// Single worker thread.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossSpaceArg {
    Cosine,
    Angle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    HalfSphere,
    JointScale,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitArg {
    Epoch,
    Batch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MomentArg {
    Sparse,
    Dense,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub embedding: PathBuf,
    /// Denoising rank for the neighbourhood score.
    #[arg(long, value_parser = parse_rank)]
    pub rank: Option<RankArg>,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 25)]
    pub density_nn: usize,
    #[arg(long, default_value_t = 64)]
    pub angle_subsample: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measure data angles on the denoised scores.
    #[arg(long)]
    pub angle_denoised: bool,
    /// Key-value report; the CSV goes to `<out>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq)]
pub enum ProjectFormat {
    Svg,
    Csv,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub granularity: usize,
    #[arg(long, value_enum, default_value_t = ProjectFormat::Svg)]
    pub format: ProjectFormat,
    #[arg(long)]
    pub color_by_label: bool,
    /// Latitude clamp in degrees.
    #[arg(long, default_value_t = DEFAULT_LAT_CLAMP.to_degrees())]
    pub lat_clamp: f64,
}

#[derive(Debug, Args)]
pub struct SpikedArgs {
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 300)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// Comma-separated signal strengths, one per latent factor.
    #[arg(long, value_delimiter = ',', default_value = "100,100,100")]
    pub sigmas: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub triples: usize,
    /// Comma-separated seeds; one report per seed.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = ScaleArg::RootDn)]
    pub loading_scale: ScaleArg,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Population,
    RootDn,
}

#[derive(Debug, Args)]
pub struct EffectiveRankArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_rank)]
    pub rank: Option<RankArg>,
    /// Number of random anchors (clipped to n).
    #[arg(long, default_value_t = 100)]
    pub anchors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-anchor CSV; a histogram goes to `<out>.hist.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let recorded: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, &recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Executes a parsed command line; `argv` (without the program name) is
/// stored in the manifests so that the run can be replayed.
pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    if let Some(path) = &cli.from_manifest {
        let manifest = RunManifest::read(path)?;
        let argv = std::iter::once("mercat".to_string()).chain(manifest.args.iter().cloned());
        let replay = Cli::try_parse_from(argv)
            .map_err(|e| MercatError::BadConfig(format!("manifest arguments: {e}")))?;
        if replay.from_manifest.is_some() {
            return Err(MercatError::BadConfig(
                "manifest refers to another manifest".into(),
            ));
        }
        return run(
            Cli {
                threads: cli.threads.or(replay.threads),
                ..replay
            },
            &manifest.args,
        );
    }
    let Some(command) = cli.command else {
        return Err(MercatError::BadConfig(
            "no command given (see --help)".into(),
        ));
    };
    let deterministic = matches!(&command, Command::Embed(a) if a.deterministic);
    configure_threads(if deterministic { Some(1) } else { cli.threads });
    let args = argv.to_vec();
    match command {
        Command::Generate(a) => cmd_generate(a, args),
        Command::Embed(a) => cmd_embed(a, args),
        Command::Metrics(a) => cmd_metrics(a, args),
        Command::Project(a) => cmd_project(a, args),
        Command::Spiked(a) => cmd_spiked(a, args),
        Command::EffectiveRank(a) => cmd_effective_rank(a, args),
    }
}

fn configure_threads(requested: Option<usize>) {
    let n = requested.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(n) = n.filter(|&n| n > 0) {
        // the global pool can only be set once per process
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::debug!("thread pool already initialised");
        }
    }
}

fn cmd_generate(a: GenerateArgs, args: Vec<String>) -> Result<()> {
    let start = Instant::now();
    let spec = DatasetSpec {
        kind: a.kind,
        n: a.n,
        seed: a.seed,
        dim: a.dim,
        circle_noise: a.noise,
        noise_scale: if a.noise_is_std {
            NoiseScale::Std
        } else {
            NoiseScale::Variance
        },
        mouth: match a.mouth {
            MouthArg::Lower => MouthShape::Lower,
            MouthArg::Literal => MouthShape::Literal,
        },
    };
    let x = generate(&spec)?;
    io::write_data_csv(&a.out, &x)?;
    Record {
        command: "generate",
        args,
        config: to_json(&spec),
        seed: a.seed,
        inputs: &[],
        outputs: &[&a.out],
    }
    .write(start)?;
    println!(
        "wrote {} rows x {} columns to {}",
        x.n(),
        x.d(),
        a.out.display()
    );
    Ok(())
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

struct Record<'a> {
    command: &'a str,
    args: Vec<String>,
    config: serde_json::Value,
    seed: u64,
    inputs: &'a [&'a Path],
    outputs: &'a [&'a Path],
}

impl Record<'_> {
    /// Writes the manifest next to the first output.
    fn write(self, start: Instant) -> Result<()> {
        let paths = |ps: &[&Path]| ps.iter().map(|p| p.display().to_string()).collect();
        RunManifest {
            command: self.command.into(),
            args: self.args,
            config: self.config,
            seed: self.seed,
            inputs: paths(self.inputs),
            outputs: paths(self.outputs),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time: start.elapsed().as_secs_f64(),
        }
        .write(&io::manifest_path(self.outputs[0]))
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or_default()
}

pub fn build_train_config(a: &EmbedArgs) -> TrainConfig {
    let mut cfg = TrainConfig {
        seed: a.seed,
        ..TrainConfig::default()
    };
    if let Some(p) = a.preset {
        cfg = cfg.with_preset(p.into());
    }
    match a.rank {
        Some(RankArg::Fixed(r)) => cfg.rank = Some(r),
        Some(RankArg::Auto) => cfg.rank_rule = RankRule::Threshold,
        Some(RankArg::Cap) | None => {}
    }
    if let Some(v) = a.iters {
        cfg.iterations = v;
        if a.milestones.is_none() {
            cfg.schedule_milestones.retain(|&m| m < v);
        }
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = &a.milestones {
        cfg.schedule_milestones = v.clone();
    }
    if let Some(v) = a.schedule_factor {
        cfg.schedule_factor = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.subsample {
        cfg.subsample_m = v;
    }
    if let Some(v) = a.loss_space {
        cfg.loss_space = match v {
            LossSpaceArg::Cosine => LossSpace::Cosine,
            LossSpaceArg::Angle => LossSpace::Angle,
        };
    }
    if let Some(v) = a.init {
        cfg.init = match v {
            InitArg::HalfSphere => InitMode::HalfSphere,
            InitArg::JointScale => InitMode::JointScale,
        };
    }
    if let Some(v) = a.moments {
        cfg.moments = match v {
            MomentArg::Sparse => MomentMode::Sparse,
            MomentArg::Dense => MomentMode::Dense,
        };
    }
    if let Some(v) = a.iteration_unit {
        cfg.iteration_unit = match v {
            UnitArg::Epoch => IterationUnit::Epoch,
            UnitArg::Batch => IterationUnit::Batch,
        };
    }
    cfg
}

fn cmd_embed(a: EmbedArgs, args: Vec<String>) -> Result<()> {
    let start = Instant::now();
    let x = io::read_data_csv(&a.input)?;
    let cfg = build_train_config(&a);
    let report = fit_with_progress(&x, &cfg, |p| {
        if (p.iteration + 1) % 100 == 0 || p.iteration + 1 == p.iterations {
            log::info!(
                "iteration {}/{}: loss {:.6}, lr {}",
                p.iteration + 1,
                p.iterations,
                p.loss,
                p.learning_rate
            );
        }
    })?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    io::write_embedding_csv(&a.out, &report.final_embedding, x.labels())?;
    let trace = with_suffix(&a.out, ".loss.csv");
    io::write_loss_trace_csv(&trace, &report.loss_trace)?;
    Record {
        command: "embed",
        args,
        config: json!({
            "train": cfg,
            "resolved_rank": report.rank,
            "deterministic": a.deterministic,
            "dropped_triples": report.dropped_triples_total,
            "warnings": report.warnings,
        }),
        seed: cfg.seed,
        inputs: &[&a.input],
        outputs: &[&a.out, &trace],
    }
    .write(start)?;
    let last = report.loss_trace.last().map_or(f64::NAN, |r| r.loss.value);
    println!(
        "embedded {} points (rank {}, {} iterations, final loss {last:.6}) to {}",
        x.n(),
        report.rank,
        cfg.iterations,
        a.out.display()
    );
    Ok(())
}

fn resolve_metric_rank(
    rank: Option<RankArg>,
    x: &crate::data::DataMatrix,
) -> Result<Option<usize>> {
    Ok(match rank {
        Some(RankArg::Fixed(r)) => Some(r),
        Some(RankArg::Auto) => {
            let cfg = TrainConfig {
                rank_rule: RankRule::Threshold,
                ..TrainConfig::default()
            };
            Some(cfg.resolved_rank(x)?)
        }
        Some(RankArg::Cap) | None => None,
    })
}

fn cmd_metrics(a: MetricsArgs, args: Vec<String>) -> Result<()> {
    let start = Instant::now();
    let x = io::read_data_csv(&a.data)?;
    let (y, _) = io::read_embedding_csv(&a.embedding)?;
    let cfg = MetricsConfig {
        k_nn: a.k,
        density_nn: a.density_nn,
        angle_subsample: a.angle_subsample,
        seed: a.seed,
        rank: resolve_metric_rank(a.rank, &x)?,
        angle_on_denoised: a.angle_denoised,
    };
    let report = evaluate(&x, &y, &cfg)?;
    let kv = report.to_key_value();
    print!("{kv}");
    if let Some(out) = &a.out {
        io::write_text(out, &kv)?;
        let csv_path = with_suffix(out, ".csv");
        io::write_text(&csv_path, &report.to_csv())?;
        Record {
            command: "metrics",
            args,
            config: to_json(&cfg),
            seed: a.seed,
            inputs: &[&a.data, &a.embedding],
            outputs: &[out, &csv_path],
        }
        .write(start)?;
    }
    Ok(())
}

fn cmd_project(a: ProjectArgs, args: Vec<String>) -> Result<()> {
    let start = Instant::now();
    if a.granularity == 0 {
        return Err(MercatError::BadConfig(
            "granularity must be positive".into(),
        ));
    }
    if !(a.lat_clamp > 0.0 && a.lat_clamp < 90.0) {
        return Err(MercatError::BadConfig(
            "latitude clamp must lie in (0, 90) degrees".into(),
        ));
    }
    let (y, labels) = io::read_embedding_csv(&a.embedding)?;
    let rotation = equator_rotation_search(&y, a.granularity);
    let xy = mercator_project(&apply_rotation(&y, &rotation), a.lat_clamp.to_radians());
    let text = match a.format {
        ProjectFormat::Svg => {
            let labels = if a.color_by_label {
                labels.as_deref()
            } else {
                None
            };
            io::scatter_svg(&xy, labels)
        }
        ProjectFormat::Csv => {
            let mut s = String::from("x,y\n");
            for (x, y) in &xy {
                s.push_str(&format!("{x},{y}\n"));
            }
            s
        }
    };
    io::write_text(&a.out, &text)?;
    Record {
        command: "project",
        args,
        config: json!({
            "granularity": a.granularity,
            "format": format!("{:?}", a.format).to_lowercase(),
            "color_by_label": a.color_by_label,
            "lat_clamp_degrees": a.lat_clamp,
            "rotation": { "alpha": rotation.alpha, "beta": rotation.beta },
        }),
        seed: 0,
        inputs: &[&a.embedding],
        outputs: &[&a.out],
    }
    .write(start)?;
    println!(
        "rotation alpha={} beta={}; wrote {} points to {}",
        rotation.alpha,
        rotation.beta,
        xy.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_spiked(a: SpikedArgs, args: Vec<String>) -> Result<()> {
    let start = Instant::now();
    let scale = match a.loading_scale {
        ScaleArg::Population => LoadingScale::Population,
        ScaleArg::RootDn => LoadingScale::RootDn,
    };
    if a.seeds.is_empty() {
        return Err(MercatError::BadConfig(
            "at least one seed is required".into(),
        ));
    }
    let reports = a
        .seeds
        .iter()
        .map(|&seed| estimator_comparison_with(a.n, a.d, a.r, &a.sigmas, a.triples, seed, scale))
        .collect::<Result<Vec<_>>>()?;
    println!("seed  spectral_mean  spectral_median  naive_mean  naive_median  ordering");
    for r in &reports {
        println!(
            "{:<5} {:<14.6} {:<16.6} {:<11.6} {:<13.6} {}",
            r.seed,
            r.spectral_mean_error,
            r.spectral_median_error,
            r.naive_mean_error,
            r.naive_median_error,
            if r.ordering_holds { "pass" } else { "fail" }
        );
    }
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&reports)
            .map_err(|e| MercatError::InvalidInput(e.to_string()))?;
        io::write_text(out, &(json + "\n"))?;
        Record {
            command: "spiked",
            args,
            config: json!({
                "n": a.n, "d": a.d, "r": a.r, "sigmas": a.sigmas, "triples": a.triples,
                "seeds": a.seeds, "loading_scale": scale,
            }),
            seed: a.seeds[0],
            inputs: &[],
            outputs: &[out],
        }
        .write(start)?;
    }
    Ok(())
}

fn cmd_effective_rank(a: EffectiveRankArgs, args: Vec<String>) -> Result<()> {
    let start = Instant::now();
    let x = io::read_data_csv(&a.data)?;
    let rank = match resolve_metric_rank(a.rank, &x)? {
        Some(r) => r,
        None => DEFAULT_MAX_RANK.min(x.n()).min(x.d()),
    };
    let x_hat = pca(&x, rank)?.scores_matrix()?;
    let count = if a.anchors > x.n() {
        eprintln!(
            "warning: {} anchors requested, clipped to n = {}",
            a.anchors,
            x.n()
        );
        x.n()
    } else {
        a.anchors
    };
    let mut rng = crate::rng::stream(a.seed, &[crate::rng::DOMAIN_EFFECTIVE_RANK]);
    let mut anchors = rand::seq::index::sample(&mut rng, x.n(), count).into_vec();
    anchors.sort_unstable();
    let ranks = anchor_effective_ranks(&x_hat, &anchors)?;
    if let Some(out) = &a.out {
        let mut s = String::from("anchor,effective_rank\n");
        for (a, r) in anchors.iter().zip(&ranks) {
            s.push_str(&format!("{a},{r}\n"));
        }
        io::write_text(out, &s)?;
        let hist_path = with_suffix(out, ".hist.csv");
        io::write_text(&hist_path, &histogram_csv(&ranks, HISTOGRAM_BIN))?;
        Record {
            command: "effective-rank",
            args,
            config: json!({ "rank": rank, "anchors": count, "histogram_bin": HISTOGRAM_BIN }),
            seed: a.seed,
            inputs: &[&a.data],
            outputs: &[out, &hist_path],
        }
        .write(start)?;
    }
    let mean = ranks.iter().sum::<f64>() / ranks.len().max(1) as f64;
    let max = ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ranks.iter().copied().fold(f64::INFINITY, f64::min);
    println!("anchors={count}\nrank={rank}\nmean_effective_rank={mean}\nmin_effective_rank={min}\nmax_effective_rank={max}");
    Ok(())
}

const HISTOGRAM_BIN: f64 = 0.5;

/// Counts per bin `[k w, (k + 1) w)` spanning the values.
fn histogram_csv(values: &[f64], width: f64) -> String {
    let mut s = String::from("bin_start,bin_end,count\n");
    if values.is_empty() {
        return s;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = (lo / width).floor() as i64;
    let last = (hi / width).floor() as i64;
    let mut counts = vec![0usize; (last - first + 1) as usize];
    for v in values {
        counts[((v / width).floor() as i64 - first) as usize] += 1;
    }
    for (k, c) in counts.iter().enumerate() {
        let start = (first + k as i64) as f64 * width;
        s.push_str(&format!("{start},{},{c}\n", start + width));
    }
    s
}
